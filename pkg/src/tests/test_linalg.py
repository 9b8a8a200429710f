import unittest

import numpy as np
from sympy import QQ, QQ_I

from multiform import linalg
from multiform.errors import MultiFormError
from multiform.scalar import ScalarKind, TolerancePolicy

Q, QI, R64, C64 = ScalarKind.Q, ScalarKind.QI, ScalarKind.R64, ScalarKind.C64
POLICY = TolerancePolicy()


class TestExactLinalg(unittest.TestCase):
    """Test suite for rational and Gaussian rational elimination."""

    def test_inverse_round_trip(self):
        """inverse(A) @ A is the identity exactly"""
        a = Q.array([[2, 1], [7, 4]])
        inv = linalg.inverse(a, Q)
        self.assertTrue(np.array_equal(linalg.matmul(inv, a, Q), linalg.identity(2, Q)))
        self.assertEqual(inv[0, 1], QQ(-1))

    def test_gaussian_inverse(self):
        """Inversion works over Q(i)"""
        a = QI.array([[1, 1j], [0, 2]])
        inv = linalg.inverse(a, QI)
        self.assertEqual(inv[0, 1], QQ_I(0, QQ(-1, 2)))
        self.assertTrue(np.array_equal(linalg.matmul(a, inv, QI), linalg.identity(2, QI)))

    def test_singular(self):
        """Singular matrices raise SINGULAR_MATRIX"""
        for kind in (Q, R64):
            with self.subTest(kind=kind):
                with self.assertRaises(MultiFormError) as context:
                    linalg.inverse(kind.array([[1, 2], [2, 4]]), kind)
                self.assertEqual(context.exception.code, "SINGULAR_MATRIX")

    def test_rank_and_nullspace(self):
        """Exact nullspace spans the kernel and has the complementary dimension"""
        a = Q.array([[1, 2, 3], [2, 4, 6]])
        self.assertEqual(linalg.rank(a, Q, POLICY), 1)
        kernel = linalg.nullspace(a, Q, POLICY)
        self.assertEqual(kernel.shape, (3, 2))
        self.assertTrue(linalg.is_zero(linalg.matmul(a, kernel, Q), Q, POLICY))

    def test_empty_nullspace(self):
        """An invertible matrix has an empty kernel"""
        kernel = linalg.nullspace(linalg.identity(3, Q), Q, POLICY)
        self.assertEqual(kernel.shape, (3, 0))

    def test_solve(self):
        """solve returns x with a @ x = b"""
        a = Q.array([[3, 1], [1, 2]])
        b = Q.array([[5], [5]])
        x = linalg.solve(a, b, Q)
        self.assertEqual(list(x[:, 0]), [QQ(1), QQ(2)])

    def test_matrix_power(self):
        """Negative exponents go through the inverse"""
        a = Q.array([[1, 1], [0, 1]])
        self.assertEqual(linalg.matrix_power(a, 5, Q)[0, 1], QQ(5))
        self.assertEqual(linalg.matrix_power(a, -3, Q)[0, 1], QQ(-3))
        self.assertTrue(np.array_equal(linalg.matrix_power(a, 0, Q), linalg.identity(2, Q)))


class TestFloatLinalg(unittest.TestCase):
    """Test suite for SVD-backed rank decisions."""

    def test_numerical_rank(self):
        """Perturbations below tolerance do not raise the rank"""
        a = np.array([[1.0, 2.0], [2.0, 4.0 + 1e-15]])
        self.assertEqual(linalg.rank(a, R64, POLICY), 1)
        kernel = linalg.nullspace(a, R64, POLICY)
        self.assertEqual(kernel.shape, (2, 1))
        self.assertLess(np.max(np.abs(a @ kernel)), 1e-9)

    def test_condition_number(self):
        """Condition number of a diagonal matrix is the ratio of extreme entries"""
        self.assertAlmostEqual(linalg.condition_number(np.diag([10.0, 0.1]), R64), 100.0)
        self.assertEqual(linalg.condition_number(Q.array([[1, 0], [0, 0]]), Q), float("inf"))

    def test_complex_inverse(self):
        """Complex inverses satisfy A @ inv(A) = I within tolerance"""
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        product = a @ linalg.inverse(a, C64)
        self.assertLess(np.max(np.abs(product - np.eye(4))), 1e-9)


class TestBasisHelpers(unittest.TestCase):
    """Test suite for span and basis helpers."""

    def test_block_diagonal(self):
        """Blocks land on the diagonal with zeros elsewhere"""
        out = linalg.block_diagonal([Q.array([[1]]), Q.array([[2, 3], [4, 5]])], Q)
        self.assertEqual(out.shape, (3, 3))
        self.assertEqual(out[1, 2], QQ(3))
        self.assertEqual(out[0, 1], QQ(0))

    def test_spans_equal(self):
        """Different generating sets of one plane have equal spans"""
        a = Q.array([[1, 0], [0, 1], [0, 0]])
        b = Q.array([[1, 1], [1, -1], [0, 0]])
        c = Q.array([[1, 0], [0, 0], [0, 1]])
        self.assertTrue(linalg.spans_equal(a, b, Q, POLICY))
        self.assertFalse(linalg.spans_equal(a, c, Q, POLICY))

    def test_complete_basis(self):
        """Added columns complete the given ones to a basis"""
        basis = Q.array([[1], [1], [0]])
        added = linalg.complete_basis(basis, 3, Q, POLICY)
        self.assertEqual(added.shape, (3, 2))
        full = linalg.hstack([basis, added], 3, Q)
        self.assertEqual(linalg.rank(full, Q, POLICY), 3)

    def test_hstack_empty(self):
        """Stacking nothing yields an m x 0 matrix"""
        self.assertEqual(linalg.hstack([], 4, Q).shape, (4, 0))


if __name__ == '__main__':
    unittest.main()
