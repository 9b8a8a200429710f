import unittest

import numpy as np
from sympy import QQ

from multiform import linalg
from multiform.errors import MultiFormError
from multiform.gen import EigenPair, GenSpec, exact_menu, gen_witness, random_invertible
from multiform.scalar import ScalarKind, TolerancePolicy
from multiform.symmetrize import (
    SignedBlock, SignedCongruence, Witness, check_witness, congruence_from_equivalence, symmetrize_complex,
    symmetrize_real, verify_congruence,
)
from multiform.tensor import LinearMap, MultiForm, change_basis, pull_back, symmetric_system, systems_equivalent

Q, QI, R64, C64 = ScalarKind.Q, ScalarKind.QI, ScalarKind.R64, ScalarKind.C64
POLICY = TolerancePolicy()


def scalar_witness(coefficient, values, kind=Q):
    """Witness on a line: G = coefficient * x_1 ... x_n and maps multiplication by values."""
    arity = len(values)
    target = MultiForm.from_entries(arity, 1, kind, {(0,) * arity: coefficient})
    maps = tuple(LinearMap(kind, kind.array([[value]])) for value in values)
    source = pull_back(target, [linear_map.entries for linear_map in maps])
    return Witness(maps, source, target)


def congruence_witness(seed, arity, dim, kind=Q):
    """All maps equal to one random invertible C."""
    rng = np.random.default_rng(seed)
    target = MultiForm(kind, kind.array(rng.integers(-3, 4, size=(dim,) * arity)))
    change = LinearMap(kind, random_invertible(rng, dim, kind))
    return Witness((change,) * arity, change_basis(target, change), target), change


def random_dims(rng, budget):
    dims = []
    while sum(dims) < budget:
        dims.append(int(rng.integers(1, 3)))
    return tuple(dims[:3])


def residual_scale(witness):
    return max(1.0, linalg.max_abs(witness.source.coeffs, witness.kind),
               linalg.max_abs(witness.target.coeffs, witness.kind))


class TestCheckWitness(unittest.TestCase):
    """Test suite for check_witness."""

    def test_congruence_is_witness(self):
        """Equal maps always form a witness"""
        witness, _ = congruence_witness(0, 3, 3)
        self.assertTrue(check_witness(witness, POLICY))

    def test_generated_witnesses(self):
        """Generated witnesses pass for exact and float kinds"""
        for seed in range(10):
            with self.subTest(seed=seed):
                self.assertTrue(check_witness(gen_witness(GenSpec(seed, 3, (2, 1), exact_menu(3))).witness))
                spec = GenSpec(seed, 4, (1, 2), (4.0, -9.0), kind=R64)
                self.assertTrue(check_witness(gen_witness(spec).witness))

    def test_perturbation_detected(self):
        """Bumping one entry of the second map breaks the witness"""
        checked = 0
        for seed in range(100):
            with self.subTest(seed=seed):
                generated = gen_witness(GenSpec(seed, 3, (1, 2), (1, 4, -4)))
                witness = generated.witness
                bump = linalg.zeros((3, 3), Q)
                bump[0, 0] = QQ(1)
                change = pull_back(witness.target, [witness.maps[0].entries, bump, witness.maps[2].entries])
                if change.is_zero(POLICY):
                    continue
                maps = list(witness.maps)
                maps[1] = LinearMap(Q, Q.array(maps[1].entries + bump))
                result = check_witness(Witness(tuple(maps), witness.source, witness.target), POLICY)
                self.assertFalse(result)
                self.assertEqual(set(result.witness), {"reordering", "index", "expected", "actual"})
                checked += 1
        self.assertGreater(checked, 50)

    def test_transpositions_only_above_four(self):
        """Arity five checks the identity and its transpositions unless asked for all orders"""
        witness, change = congruence_witness(1, 5, 2)
        self.assertTrue(check_witness(witness, POLICY))
        self.assertTrue(check_witness(witness, POLICY, full_sweep=True))
        maps = list(witness.maps)
        maps[4] = change.scaled(2)
        self.assertFalse(check_witness(Witness(tuple(maps), witness.source, witness.target), POLICY))

    def test_witness_shape_errors(self):
        """Witness construction validates arity and kinds"""
        witness = scalar_witness(1, [1, 2, 4])
        with self.assertRaises(MultiFormError) as context:
            Witness(witness.maps[:2], witness.source, witness.target)
        self.assertEqual(context.exception.code, "ARITY_MISMATCH")
        with self.assertRaises(MultiFormError) as context:
            Witness(witness.maps, witness.source.as_kind(R64), witness.target)
        self.assertEqual(context.exception.code, "KIND_MISMATCH")


class TestSymmetrizeComplex(unittest.TestCase):
    """Test suite for symmetrize_complex."""

    def test_fixed_point(self):
        """Equal maps come back unchanged"""
        witness, change = congruence_witness(2, 3, 3)
        psi = symmetrize_complex(witness, POLICY)
        self.assertTrue(psi.equals(change.as_kind(QI)))

    def test_scalar_cube(self):
        """G = xyz with maps (1, 2, 4) gives psi = 2 through the float fallback"""
        witness = scalar_witness(1, [1, 2, 4])
        self.assertEqual(witness.source.coeffs[0, 0, 0], QQ(8))
        with self.assertLogs("multiform.symmetrize", level="WARNING"):
            psi = symmetrize_complex(witness, POLICY)
        self.assertEqual(psi.kind, C64)
        self.assertAlmostEqual(psi.entries[0, 0], 2.0)

    def test_scalar_cube_without_fallback(self):
        """Without the fallback the irrational intermediate root is reported"""
        with self.assertRaises(MultiFormError) as context:
            symmetrize_complex(scalar_witness(1, [1, 2, 4]), POLICY, float_fallback=False)
        self.assertEqual(context.exception.code, "NO_ROOT_IN_FIELD")
        self.assertEqual(context.exception.details["cause"], "NO_ROOT_IN_FIELD")

    def test_invalid_witness(self):
        """A witness failing its check is rejected before any computation"""
        witness = scalar_witness(1, [1, 2, 4])
        broken = Witness(witness.maps, witness.source.scaled(2), witness.target)
        with self.assertRaises(MultiFormError) as context:
            symmetrize_complex(broken, POLICY)
        self.assertEqual(context.exception.code, "WITNESS_INVALID")
        self.assertEqual(context.exception.details["reordering"], (0, 1, 2))

    def test_singular_map(self):
        """Zero maps relate the zero forms but cannot be inverted"""
        target = MultiForm.zeros(3, 2, Q)
        zero = LinearMap(Q, linalg.zeros((2, 2), Q))
        with self.assertRaises(MultiFormError) as context:
            symmetrize_complex(Witness((zero,) * 3, target, target), POLICY)
        self.assertEqual(context.exception.code, "SINGULAR_INPUT")

    def test_ill_conditioned_map(self):
        """Maps above the condition limit are refused"""
        target = MultiForm(R64, np.eye(2))
        stretch = LinearMap(R64, np.diag([1e6, 1e-7]))
        source = pull_back(target, [stretch.entries] * 2)
        exact_policy = TolerancePolicy(rel_tol=0.0, abs_tol=0.0)
        with self.assertRaises(MultiFormError) as context:
            symmetrize_complex(Witness((stretch, stretch), source, target), exact_policy)
        self.assertEqual(context.exception.code, "NUMERICAL_INSTABILITY")

    def test_exact_generated(self):
        """Exact generated witnesses are solved with zero residual or a small float one"""
        rng = np.random.default_rng(3)
        for seed in range(60):
            with self.subTest(seed=seed):
                arity = 3 if seed % 4 else 4
                # fourth roots of negative values leave Q(i)
                menu = exact_menu(3) if arity == 3 else (1, 4096)
                spec = GenSpec(seed, arity, random_dims(rng, 3), menu, kind=Q if seed % 2 else QI)
                witness = gen_witness(spec).witness
                psi = symmetrize_complex(witness)
                residual = verify_congruence(witness.source, witness.target, psi)
                if psi.kind.is_exact:
                    self.assertEqual(residual, 0.0)
                self.assertLess(residual, 1e-8 * residual_scale(witness))

    def test_float_generated(self):
        """Float generated witnesses have residual below 1e-8 relative to the coefficients"""
        menus = [(1.0, 16.0), (4.0, -9.0), (1.0, 4j, -2.0)]
        rng = np.random.default_rng(4)
        for seed in range(140):
            with self.subTest(seed=seed):
                menu = menus[seed % 3]
                kind = C64 if any(isinstance(v, complex) for v in menu) else R64
                spec = GenSpec(seed, 3, random_dims(rng, 4), menu, kind=kind)
                witness = gen_witness(spec).witness
                psi = symmetrize_complex(witness)
                residual = verify_congruence(witness.source, witness.target, psi)
                self.assertLess(residual, 1e-8 * residual_scale(witness))

    def test_verify_steps(self):
        """Re-checking the witness after every step succeeds on generated instances"""
        for seed in range(5):
            with self.subTest(seed=seed):
                witness = gen_witness(GenSpec(seed, 3, (2, 1), exact_menu(3))).witness
                psi = symmetrize_complex(witness, verify_steps=True)
                self.assertLess(verify_congruence(witness.source, witness.target, psi),
                                1e-8 * residual_scale(witness))


class TestSymmetrizeReal(unittest.TestCase):
    """Test suite for symmetrize_real."""

    def test_fixed_point(self):
        """Equal maps give one +1 block and psi unchanged"""
        witness, change = congruence_witness(5, 3, 2)
        result = symmetrize_real(witness, POLICY)
        self.assertEqual(result.signs, [1])
        self.assertTrue(result.psi.equals(change))

    def test_negative_line(self):
        """G = xy with maps (1, -1) is congruent to -G"""
        witness = scalar_witness(1, [1, -1])
        self.assertEqual(witness.source.coeffs[0, 0], QQ(-1))
        result = symmetrize_real(witness, POLICY)
        self.assertEqual(result.signs, [-1])
        self.assertIn(result.psi.entries[0, 0], (QQ(1), QQ(-1)))
        self.assertEqual(verify_congruence(witness.source, witness.target, result.psi, result.blocks), 0.0)

    def test_complex_kind_rejected(self):
        """Real symmetrization needs a real kind"""
        with self.assertRaises(MultiFormError) as context:
            symmetrize_real(scalar_witness(1, [1, 1], kind=QI), POLICY)
        self.assertEqual(context.exception.code, "KIND_MISMATCH")

    def _assert_signs(self, generated, result):
        negative = [dim for dim, sign in zip(generated.spec.block_dims, generated.expected_signs) if sign == -1]
        if negative:
            self.assertIn(-1, result.signs)
            block = result.blocks[result.signs.index(-1)]
            self.assertEqual(block.basis.shape[1], sum(negative))
        else:
            self.assertEqual(result.signs, [1])

    def test_exact_generated(self):
        """Exact real witnesses are solved and the constructed negative blocks carry sign -1"""
        rng = np.random.default_rng(6)
        for seed in range(60):
            with self.subTest(seed=seed):
                spec = GenSpec(seed, 3, random_dims(rng, 3), (1, 64, -64))
                generated = gen_witness(spec)
                witness = generated.witness
                result = symmetrize_real(witness)
                residual = verify_congruence(witness.source, witness.target, result.psi, result.blocks)
                self.assertLess(residual, 1e-8 * residual_scale(witness))
                self._assert_signs(generated, result)

    def test_float_generated(self):
        """Float witnesses with 4, -9 and a rotation pair are solved with matching signs"""
        menus = [(4.0, -9.0, EigenPair(2.0, 1.0)), (1.0, 16.0), (-4.0, EigenPair(1.0, 1.0))]
        for seed in range(140):
            with self.subTest(seed=seed):
                menu = menus[seed % 3]
                dims = (1, 1, 2) if len(menu) == 3 else (2, 2) if isinstance(menu[1], EigenPair) else (1, 2)
                generated = gen_witness(GenSpec(seed, 3, dims, menu, kind=R64))
                witness = generated.witness
                result = symmetrize_real(witness)
                self.assertEqual(result.psi.kind, R64)
                residual = verify_congruence(witness.source, witness.target, result.psi, result.blocks)
                self.assertLess(residual, 1e-8 * residual_scale(witness))
                self._assert_signs(generated, result)

    def test_quarter_turn_sign(self):
        """A quarter-turn block whose last step sees -1 comes back with sign -1 and zero residual"""
        generated = gen_witness(GenSpec(3, 3, (2,), (EigenPair(0, 1),), exponents=(0, 0, 2)))
        witness = generated.witness
        result = symmetrize_real(witness, POLICY, float_fallback=False)
        self.assertEqual(result.signs, [-1])
        self.assertEqual(verify_congruence(witness.source, witness.target, result.psi, result.blocks), 0.0)

    def test_wide_rotation_pairs(self):
        """Rotation pairs at or beyond a quarter turn are solved with the traced signs"""
        menus = [(4.0, -9.0, EigenPair(0.0, 1.0)), (-4.0, EigenPair(-1.0, 2.0))]
        for seed in range(40):
            with self.subTest(seed=seed):
                menu = menus[seed % 2]
                dims = (2, 2, 2) if len(menu) == 3 else (1, 2)
                generated = gen_witness(GenSpec(seed, 3, dims, menu, kind=R64))
                witness = generated.witness
                result = symmetrize_real(witness)
                residual = verify_congruence(witness.source, witness.target, result.psi, result.blocks)
                self.assertLess(residual, 1e-8 * residual_scale(witness))
                self._assert_signs(generated, result)


class TestVerifyCongruence(unittest.TestCase):
    """Test suite for verify_congruence and signed targets."""

    def test_identity(self):
        """psi = I and G = F gives zero"""
        witness, _ = congruence_witness(7, 3, 2)
        form = witness.target
        self.assertEqual(verify_congruence(form, form, LinearMap.identity(2, Q)), 0.0)

    def test_bumped_coefficient(self):
        """Bumping one coefficient by 1 gives residual 1"""
        form = MultiForm(Q, Q.array(np.arange(8).reshape(2, 2, 2)))
        bumped = form + MultiForm.from_entries(3, 2, Q, {(1, 0, 1): 1})
        self.assertEqual(verify_congruence(bumped, form, LinearMap.identity(2, Q)), 1.0)

    def test_signed_target(self):
        """A -1 block negates G on its summand only"""
        target = MultiForm(Q, Q.array([[1, 0], [0, 1]]))
        blocks = (SignedBlock(Q.array([[1], [0]]), 1), SignedBlock(Q.array([[0], [1]]), -1))
        signed = SignedCongruence(LinearMap.identity(2, Q), blocks).signed_target(target)
        self.assertTrue(signed.equals(MultiForm(Q, Q.array([[1, 0], [0, -1]]))))
        self.assertEqual(verify_congruence(signed, target, LinearMap.identity(2, Q), blocks), 0.0)

    def test_invalid_sign(self):
        """Block signs are +1 or -1"""
        with self.assertRaises(MultiFormError):
            SignedBlock(Q.array([[1]]), 0)


class TestCongruenceFromEquivalence(unittest.TestCase):
    """Test suite for congruence_from_equivalence."""

    def test_symmetric_bilinear(self):
        """F(u, v) = G(u, S v) with symmetric S becomes a congruence"""
        target = MultiForm(Q, linalg.identity(2, Q))
        stretch = LinearMap(Q, Q.array([[5, 4], [4, 5]]))
        maps = (LinearMap.identity(2, Q), stretch)
        source = MultiForm(Q, stretch.entries)
        psi = congruence_from_equivalence(source, target, maps, 1, POLICY)
        self.assertEqual(verify_congruence(source, target, psi), 0.0)

    def test_chained_with_systems_equivalent(self):
        """Maps accepted by systems_equivalent on the permuted systems yield a verified congruence"""
        target = MultiForm(Q, Q.array([[3, 1], [1, 3]]))
        stretch = LinearMap(Q, Q.array([[5, 4], [4, 5]]))
        maps = (LinearMap.identity(2, Q), stretch)
        source = pull_back(target, [maps[0].entries, stretch.entries])
        self.assertTrue(systems_equivalent(symmetric_system(source), symmetric_system(target), maps, POLICY))
        psi = congruence_from_equivalence(source, target, maps, 1, POLICY)
        self.assertEqual(verify_congruence(source, target, psi), 0.0)
        other = MultiForm(Q, Q.array([[1, 0], [0, 1]]))
        result = systems_equivalent(symmetric_system(other), symmetric_system(target), maps, POLICY)
        self.assertFalse(result)
        self.assertEqual(result.witness["position"], 0)

    def test_not_symmetric(self):
        """A non-symmetric source is refused"""
        target = MultiForm(Q, linalg.identity(2, Q))
        source = MultiForm(Q, Q.array([[1, 2], [0, 1]]))
        maps = (LinearMap.identity(2, Q), LinearMap(Q, Q.array([[1, 2], [0, 1]])))
        with self.assertRaises(MultiFormError) as context:
            congruence_from_equivalence(source, target, maps, 1, POLICY)
        self.assertEqual(context.exception.code, "WITNESS_INVALID")
        self.assertEqual(context.exception.details["form"], "source")


if __name__ == '__main__':
    unittest.main()
