import itertools
import unittest

import numpy as np
from sympy import QQ

from multiform import linalg
from multiform.errors import MultiFormError
from multiform.gen import random_invertible
from multiform.scalar import ScalarKind, TolerancePolicy
from multiform.tensor import (
    LinearMap, MultiForm, Permutation, change_basis, check_equivalence, contract_slot, direct_sum, eval_form,
    first_mixed_nonzero, forms_close, is_epsilon_symmetric, permute_slots, radical, restrict, symmetric_system,
    systems_equivalent, zero_form,
)

Q, R64 = ScalarKind.Q, ScalarKind.R64
POLICY = TolerancePolicy()


def random_form(rng, arity, dim):
    return MultiForm(Q, Q.array(rng.integers(-3, 4, size=(dim,) * arity)))


def random_map(rng, dim):
    return LinearMap(Q, Q.array(rng.integers(-3, 4, size=(dim, dim))))


def basis_tuples(arity, dim):
    return itertools.product(range(dim), repeat=arity)


class TestEval(unittest.TestCase):
    """Test suite for eval_form."""

    def setUp(self):
        self.form = MultiForm.from_entries(3, 2, Q, {(0, 0, 0): 1})

    def test_basis_evaluation(self):
        """F(e0, e0, e0) picks the single coefficient"""
        self.assertEqual(eval_form(self.form, [[1, 0]] * 3).value, QQ(1))

    def test_linearity(self):
        """The e1 component contributes nothing"""
        self.assertEqual(eval_form(self.form, [[1, 1], [1, 0], [1, 0]]).value, QQ(1))

    def test_matches_nested_loops(self):
        """Evaluation agrees with a literal nested-loop sum"""
        rng = np.random.default_rng(0)
        for seed in range(100):
            with self.subTest(seed=seed):
                form = random_form(rng, 3, 2)
                xs = [Q.array(rng.integers(-5, 6, size=2)) for _ in range(3)]
                expected = QQ(0)
                for i in range(2):
                    for j in range(2):
                        for k in range(2):
                            expected += form.coeffs[i, j, k] * xs[0][i] * xs[1][j] * xs[2][k]
                self.assertEqual(eval_form(form, xs).value, expected)

    def test_wrong_vector_count(self):
        """Too few vectors raise ARITY_MISMATCH"""
        with self.assertRaises(MultiFormError) as context:
            eval_form(self.form, [[1, 0]] * 2)
        self.assertEqual(context.exception.code, "ARITY_MISMATCH")

    def test_wrong_vector_length(self):
        """Vectors of the wrong length raise DIMENSION_MISMATCH"""
        with self.assertRaises(MultiFormError) as context:
            eval_form(self.form, [[1, 0, 0]] * 3)
        self.assertEqual(context.exception.code, "DIMENSION_MISMATCH")


class TestMultiForm(unittest.TestCase):
    """Test suite for MultiForm construction."""

    def test_rejects_unequal_slots(self):
        """Every slot must share one dimension"""
        with self.assertRaises(MultiFormError) as context:
            MultiForm(Q, Q.array(np.zeros((2, 3), dtype=int)))
        self.assertEqual(context.exception.code, "DIMENSION_MISMATCH")

    def test_rejects_arity_one(self):
        """Linear functionals are not forms here"""
        with self.assertRaises(MultiFormError) as context:
            MultiForm(Q, Q.array([1, 2]))
        self.assertEqual(context.exception.code, "ARITY_MISMATCH")

    def test_coefficients_are_frozen(self):
        """Coefficient arrays cannot be mutated in place"""
        form = zero_form(2, 2, Q)
        with self.assertRaises(ValueError):
            form.coeffs[0, 0] = QQ(1)

    def test_index_out_of_range(self):
        """from_entries validates indices"""
        with self.assertRaises(MultiFormError):
            MultiForm.from_entries(2, 2, Q, {(0, 2): 1})


class TestPermuteSlots(unittest.TestCase):
    """Test suite for permute_slots and Permutation."""

    def test_identity(self):
        """The identity permutation leaves F unchanged"""
        form = random_form(np.random.default_rng(1), 3, 2)
        self.assertTrue(permute_slots(form, Permutation.identity(3)).equals(form))

    def test_symmetric_form_fixed(self):
        """A fully symmetric form is fixed by every permutation"""
        form = MultiForm.from_entries(3, 2, Q, {index: 1 for index in basis_tuples(3, 2)})
        for permuted in symmetric_system(form):
            self.assertTrue(permuted.equals(form))

    def test_swap_moves_coefficient(self):
        """Swapping slots 1 and 2 moves a010 to a001"""
        form = MultiForm.from_entries(3, 2, Q, {(0, 1, 0): 5})
        permuted = permute_slots(form, Permutation.transposition(3, 1, 2))
        self.assertTrue(permuted.equals(MultiForm.from_entries(3, 2, Q, {(0, 0, 1): 5})))

    def test_matches_definition(self):
        """F^sigma(e_i) equals F at the permuted index tuple for all sigma"""
        form = random_form(np.random.default_rng(2), 3, 2)
        for images in itertools.permutations(range(3)):
            sigma = Permutation(images)
            permuted = permute_slots(form, sigma)
            for index in basis_tuples(3, 2):
                self.assertEqual(permuted.coeffs[index], form.coeffs[tuple(index[sigma(k)] for k in range(3))])

    def test_composition(self):
        """(F^sigma)^pi is F^(sigma * pi)"""
        form = random_form(np.random.default_rng(3), 3, 2)
        for sigma, pi in itertools.product(itertools.permutations(range(3)), repeat=2):
            sigma, pi = Permutation(sigma), Permutation(pi)
            twice = permute_slots(permute_slots(form, sigma), pi)
            self.assertTrue(twice.equals(permute_slots(form, sigma * pi)))

    def test_sign(self):
        """Transpositions are odd and 3-cycles even"""
        self.assertEqual(Permutation.transposition(3, 0, 2).sign(), -1)
        self.assertEqual(Permutation((1, 2, 0)).sign(), 1)
        self.assertEqual((Permutation((1, 2, 0)) * Permutation((1, 2, 0)).inverse()).images, (0, 1, 2))

    def test_invalid_permutation(self):
        """Repeated images are rejected"""
        with self.assertRaises(MultiFormError) as context:
            Permutation((0, 0, 1))
        self.assertEqual(context.exception.code, "INVALID_PERMUTATION")


class TestContractions(unittest.TestCase):
    """Test suite for contract_slot and change_basis."""

    def test_contract_identity_and_zero(self):
        """Identity leaves F alone; the zero map kills it"""
        form = random_form(np.random.default_rng(4), 3, 2)
        self.assertTrue(contract_slot(form, 1, LinearMap.identity(2, Q)).equals(form))
        zero = LinearMap(Q, linalg.zeros((2, 2), Q))
        self.assertTrue(contract_slot(form, 1, zero).is_zero())

    def test_contract_matches_definition(self):
        """contract_slot agrees with the coefficient sum on all basis tuples"""
        rng = np.random.default_rng(5)
        for seed in range(50):
            with self.subTest(seed=seed):
                form, linear_map = random_form(rng, 3, 2), random_map(rng, 2)
                contracted = contract_slot(form, 1, linear_map)
                for i, j, k in basis_tuples(3, 2):
                    expected = sum((form.coeffs[i, l, k] * linear_map.entries[l, j] for l in range(2)), QQ(0))
                    self.assertEqual(contracted.coeffs[i, j, k], expected)

    def test_change_basis_matches_definition(self):
        """change_basis agrees with the full triple sum"""
        rng = np.random.default_rng(6)
        for seed in range(20):
            with self.subTest(seed=seed):
                form, transition = random_form(rng, 3, 2), random_map(rng, 2)
                c = transition.entries
                changed = change_basis(form, transition)
                for target in basis_tuples(3, 2):
                    expected = QQ(0)
                    for source in basis_tuples(3, 2):
                        term = form.coeffs[source]
                        for slot in range(3):
                            term *= c[source[slot], target[slot]]
                        expected += term
                    self.assertEqual(changed.coeffs[target], expected)

    def test_change_basis_homogeneity(self):
        """C = 2I multiplies every trilinear coefficient by 8"""
        form = random_form(np.random.default_rng(7), 3, 3)
        doubled = change_basis(form, LinearMap(Q, linalg.identity(3, Q) * QQ(2)))
        self.assertTrue(doubled.equals(form.scaled(8)))

    def test_change_basis_composes(self):
        """change_basis(F, C @ D) is change_basis(change_basis(F, C), D)"""
        rng = np.random.default_rng(8)
        form, c, d = random_form(rng, 3, 3), random_map(rng, 3), random_map(rng, 3)
        self.assertTrue(change_basis(form, c @ d).equals(change_basis(change_basis(form, c), d)))

    def test_kind_mismatch(self):
        """Forms and maps of different kinds cannot be combined"""
        form = zero_form(2, 2, Q)
        with self.assertRaises(MultiFormError) as context:
            change_basis(form, LinearMap.identity(2, R64))
        self.assertEqual(context.exception.code, "KIND_MISMATCH")


class TestDirectSumAndRadical(unittest.TestCase):
    """Test suite for direct_sum, radical and restriction."""

    def test_direct_sum_mixed_arguments(self):
        """Mixed arguments from the two summands evaluate to zero"""
        rng = np.random.default_rng(9)
        first, second = random_form(rng, 3, 2), random_form(rng, 3, 1)
        total = direct_sum(first, second)
        self.assertEqual(total.dim, 3)
        u, v = [1, 2, 0], [0, 0, 1]
        self.assertEqual(eval_form(total, [u, v, u]).value, QQ(0))
        self.assertEqual(eval_form(total, [u, u, u]).value, eval_form(first, [[1, 2]] * 3).value)
        self.assertIsNone(first_mixed_nonzero(total, [0, 0, 1]))

    def test_first_mixed_nonzero(self):
        """A coefficient linking two blocks is reported"""
        form = MultiForm.from_entries(2, 3, Q, {(0, 0): 1, (2, 2): 1, (0, 2): 4})
        self.assertEqual(first_mixed_nonzero(form, [0, 0, 1]), (0, 2))
        self.assertEqual(first_mixed_nonzero(MultiForm.from_entries(2, 2, Q, {(1, 1): 1}), [0, -1]), (1, 1))

    def test_radical_of_corner_form(self):
        """x0*y0*z0 on a plane has radical span(e1)"""
        basis = radical(MultiForm.from_entries(3, 2, Q, {(0, 0, 0): 1}), POLICY)
        self.assertEqual(basis.shape, (2, 1))
        self.assertEqual(basis[0, 0], QQ(0))
        self.assertNotEqual(basis[1, 0], QQ(0))

    def test_nondegenerate_radical_empty(self):
        """The standard symmetric bilinear form has no radical"""
        self.assertEqual(radical(MultiForm(Q, linalg.identity(3, Q)), POLICY).shape, (3, 0))

    def test_radical_of_padded_form(self):
        """Padding with a zero summand adds exactly the appended vectors"""
        padded = direct_sum(MultiForm.from_entries(3, 1, Q, {(0, 0, 0): 2}), zero_form(3, 2, Q))
        basis = radical(padded, POLICY)
        self.assertTrue(linalg.spans_equal(basis, linalg.identity(3, Q)[:, 1:], Q, POLICY))
        for column in range(basis.shape[1]):
            vector = basis[:, column]
            for slot in range(3):
                for others in basis_tuples(2, 3):
                    xs = [linalg.identity(3, Q)[:, i] for i in others]
                    xs.insert(slot, vector)
                    self.assertEqual(eval_form(padded, xs).value, QQ(0))

    def test_float_radical(self):
        """Float radicals respect the tolerance policy"""
        form = MultiForm(R64, np.array([[1.0, 0.0], [0.0, 1e-15]]))
        self.assertEqual(radical(form, POLICY).shape, (2, 1))

    def test_restrict(self):
        """Restricting to a coordinate block returns that block"""
        rng = np.random.default_rng(10)
        first, second = random_form(rng, 3, 2), random_form(rng, 3, 2)
        total = direct_sum(first, second)
        self.assertTrue(restrict(total, linalg.identity(4, Q)[:, 2:]).equals(second))


class TestRandomizedIdentities(unittest.TestCase):
    """Seeded checks over arity 2 to 4 and dimension 1 to 3."""

    def instances(self, seed):
        rng = np.random.default_rng(100 + seed)
        arity, dim = 2 + seed % 3, 1 + (seed // 3) % 3
        return rng, arity, dim

    def invertible(self, rng, dim):
        return LinearMap(Q, random_invertible(rng, dim, Q))

    def test_permute_slots_oracle(self):
        """Every coefficient of F^sigma is F at the reordered index"""
        for seed in range(100):
            with self.subTest(seed=seed):
                rng, arity, dim = self.instances(seed)
                form = random_form(rng, arity, dim)
                sigma = Permutation(tuple(int(k) for k in rng.permutation(arity)))
                permuted = permute_slots(form, sigma)
                for index in basis_tuples(arity, dim):
                    expected = form.coeffs[tuple(index[sigma(k)] for k in range(arity))]
                    self.assertEqual(permuted.coeffs[index], expected)

    def test_change_basis_oracle(self):
        """Coefficients after a change of basis are F evaluated on columns of C"""
        for seed in range(100):
            with self.subTest(seed=seed):
                rng, arity, dim = self.instances(seed)
                form, transition = random_form(rng, arity, dim), random_map(rng, dim)
                changed = change_basis(form, transition)
                for index in basis_tuples(arity, dim):
                    columns = [list(transition.entries[:, i]) for i in index]
                    self.assertEqual(changed.coeffs[index], eval_form(form, columns).value)

    def test_contract_commutes_with_change_basis(self):
        """Contracting with M after C equals contracting with C M C^-1 before C"""
        for seed in range(100):
            with self.subTest(seed=seed):
                rng, arity, dim = self.instances(seed)
                form, change, linear_map = random_form(rng, arity, dim), self.invertible(rng, dim), random_map(rng, dim)
                slot = int(rng.integers(0, arity))
                conjugated = change @ linear_map @ change.inverse()
                left = contract_slot(change_basis(form, change), slot, linear_map)
                right = change_basis(contract_slot(form, slot, conjugated), change)
                self.assertTrue(left.equals(right))

    def test_change_basis_inverse(self):
        """Changing basis by C and then by C^-1 restores F"""
        for seed in range(100):
            with self.subTest(seed=seed):
                rng, arity, dim = self.instances(seed)
                form, change = random_form(rng, arity, dim), self.invertible(rng, dim)
                self.assertTrue(change_basis(change_basis(form, change), change.inverse()).equals(form))

    def test_radical_covariance(self):
        """The radical of F under C is C^-1 applied to the radical of F"""
        for seed in range(100):
            with self.subTest(seed=seed):
                rng, arity, dim = self.instances(seed)
                padding = int(rng.integers(0, 2))
                form = random_form(rng, arity, dim)
                if padding:
                    form = direct_sum(form, zero_form(arity, padding, Q))
                change = self.invertible(rng, dim + padding)
                expected = linalg.matmul(change.inverse().entries, radical(form, POLICY), Q)
                actual = radical(change_basis(form, change), POLICY)
                self.assertEqual(actual.shape, expected.shape)
                self.assertTrue(linalg.spans_equal(actual, expected, Q, POLICY))

    def test_direct_sum_associative(self):
        """(A + B) + C and A + (B + C) have the same coefficients"""
        for seed in range(100):
            with self.subTest(seed=seed):
                rng, arity, dim = self.instances(seed)
                first, second, third = (random_form(rng, arity, int(rng.integers(1, 4))) for _ in range(3))
                left = direct_sum(direct_sum(first, second), third)
                right = direct_sum(first, direct_sum(second, third))
                self.assertEqual(left.dim, first.dim + second.dim + third.dim)
                self.assertTrue(left.equals(right))


class TestEpsilonSymmetry(unittest.TestCase):
    """Test suite for is_epsilon_symmetric and check_equivalence."""

    def test_symmetric_bilinear(self):
        """Symmetric matrices are +1-symmetric"""
        self.assertTrue(is_epsilon_symmetric(MultiForm(Q, Q.array([[1, 2], [2, 5]])), 1, POLICY))

    def test_alternating_bilinear(self):
        """[[0, 1], [-1, 0]] is -1-symmetric"""
        form = MultiForm(Q, Q.array([[0, 1], [-1, 0]]))
        self.assertTrue(is_epsilon_symmetric(form, -1, POLICY))
        self.assertFalse(is_epsilon_symmetric(form, 1, POLICY))

    def test_random_trilinear_not_symmetric(self):
        """A non-symmetric form reports the failing transposition"""
        form = MultiForm.from_entries(3, 2, Q, {(0, 1, 0): 1})
        result = is_epsilon_symmetric(form, [1, 1], POLICY)
        self.assertFalse(result)
        self.assertIn(result.witness["transposition"], [(0, 1), (0, 2), (1, 2)])

    def test_inconsistent_signs(self):
        """Mixed generator signs do not extend to a character"""
        with self.assertRaises(MultiFormError) as context:
            is_epsilon_symmetric(zero_form(3, 2, Q), [1, -1], POLICY)
        self.assertEqual(context.exception.code, "INCONSISTENT_SIGN_MAP")

    def test_check_equivalence(self):
        """A changed basis is equivalent through the transition in every slot"""
        rng = np.random.default_rng(11)
        form, transition = random_form(rng, 3, 2), random_map(rng, 2)
        changed = change_basis(form, transition)
        self.assertTrue(check_equivalence(changed, form, [transition] * 3, POLICY))
        bumped = changed + MultiForm.from_entries(3, 2, Q, {(1, 1, 1): 1})
        result = check_equivalence(bumped, form, [transition] * 3, POLICY)
        self.assertFalse(result)
        self.assertEqual(result.witness["index"], (1, 1, 1))

    def test_systems_equivalent(self):
        """Symmetric systems of congruent forms are equivalent through the same maps"""
        rng = np.random.default_rng(12)
        form, transition = random_form(rng, 3, 2), random_map(rng, 2)
        changed = change_basis(form, transition)
        maps = [transition] * 3
        self.assertTrue(systems_equivalent(symmetric_system(changed), symmetric_system(form), maps, POLICY))
        bumped = changed + MultiForm.from_entries(3, 2, Q, {(1, 1, 1): 1})
        result = systems_equivalent(symmetric_system(bumped), symmetric_system(form), maps, POLICY)
        self.assertFalse(result)
        self.assertEqual(result.witness["position"], 0)
        with self.assertRaises(MultiFormError) as context:
            systems_equivalent([changed], symmetric_system(form), maps, POLICY)
        self.assertEqual(context.exception.code, "DIMENSION_MISMATCH")

    def test_apply_map(self):
        """LinearMap.apply multiplies a coordinate vector"""
        result = LinearMap(Q, Q.array([[1, 2], [3, 4]])).apply([1, 1])
        self.assertEqual(list(result), [QQ(3), QQ(7)])

    def test_forms_close_float(self):
        """Float comparison uses one scale for the whole tensor"""
        a = MultiForm(R64, np.array([[1e6, 0.0], [0.0, 1.0]]))
        b = MultiForm(R64, np.array([[1e6, 0.0], [0.0, 1.0 + 1e-5]]))
        self.assertIsNone(forms_close(a, b, POLICY))


if __name__ == '__main__':
    unittest.main()
