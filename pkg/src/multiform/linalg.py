"""
Dense linear algebra over every scalar kind.

Exact kinds go through sympy's DomainMatrix (rational elimination over QQ
and QQ_I); float kinds through numpy/scipy with SVD rank decisions driven by
the TolerancePolicy.
"""
import numpy as np
import scipy.linalg
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.exceptions import DMNonInvertibleMatrixError

from multiform.errors import MultiFormError


def to_domain_matrix(mat, kind):
    rows, cols = mat.shape
    return DomainMatrix([[mat[i, j] for j in range(cols)] for i in range(rows)], (rows, cols), kind.domain)


def from_domain_matrix(dm, kind):
    rows, cols = dm.shape
    out = np.empty((rows, cols), dtype=object)
    for i, row in enumerate(dm.to_list()):
        for j, value in enumerate(row):
            out[i, j] = value
    return kind.array(out)


def identity(m, kind):
    if kind.is_exact:
        out = np.empty((m, m), dtype=object)
        for index in np.ndindex(m, m):
            out[index] = kind.one if index[0] == index[1] else kind.zero
        return out
    return np.eye(m, dtype=kind.dtype)


def zeros(shape, kind):
    if kind.is_exact:
        out = np.empty(shape, dtype=object)
        out.fill(kind.zero)
        return out
    return np.zeros(shape, dtype=kind.dtype)


def matmul(a, b, kind):
    if a.shape[1] == 0:
        return zeros((a.shape[0], b.shape[1]), kind)
    return kind.array(a @ b)


def max_abs(arr, kind):
    """Largest entry magnitude as a float; 0.0 for empty arrays."""
    if arr.size == 0:
        return 0.0
    if kind.is_exact:
        return max(kind.magnitude(value) for value in arr.flat)
    return float(np.max(np.abs(arr)))


def is_zero(arr, kind, policy, scale=1.0):
    if kind.is_exact:
        return not any(bool(value) for value in arr.flat)
    return max_abs(arr, kind) <= policy.threshold(scale)


def _singular_values(mat):
    return scipy.linalg.svd(mat, compute_uv=False)


def rank(mat, kind, policy):
    if mat.size == 0:
        return 0
    if kind.is_exact:
        return to_domain_matrix(mat, kind).rank()
    values = _singular_values(mat)
    return int(np.sum(values > policy.threshold(values[0])))


def nullspace(mat, kind, policy):
    """
    Basis of {x : mat @ x = 0} as the columns of the returned matrix.

    Float kinds use the trailing right singular vectors of the SVD.
    """
    rows, cols = mat.shape
    if cols == 0:
        return zeros((0, 0), kind)
    if rows == 0:
        return identity(cols, kind)
    if kind.is_exact:
        basis = to_domain_matrix(mat, kind).nullspace()
        if basis.shape[0] == 0:
            return zeros((cols, 0), kind)
        return from_domain_matrix(basis, kind).T.copy()
    _, values, vh = scipy.linalg.svd(mat)
    found = int(np.sum(values > policy.threshold(values[0] if values.size else 0.0)))
    return np.ascontiguousarray(vh[found:].conj().T).astype(kind.dtype)


def inverse(mat, kind):
    """
    Raises:
        MultiFormError: SINGULAR_MATRIX
    """
    rows, cols = mat.shape
    if rows != cols:
        raise MultiFormError(f"Cannot invert a {rows}x{cols} matrix", "DIMENSION_MISMATCH")
    if rows == 0:
        return zeros((0, 0), kind)
    if kind.is_exact:
        try:
            return from_domain_matrix(to_domain_matrix(mat, kind).inv(), kind)
        except (DMNonInvertibleMatrixError, ZeroDivisionError):
            raise MultiFormError("Matrix is not invertible", "SINGULAR_MATRIX")
    try:
        result = scipy.linalg.inv(mat)
    except (np.linalg.LinAlgError, ValueError):
        raise MultiFormError("Matrix is not invertible", "SINGULAR_MATRIX")
    if not np.all(np.isfinite(result)):
        raise MultiFormError("Matrix is not invertible", "SINGULAR_MATRIX")
    return result.astype(kind.dtype)


def solve(a, b, kind):
    """Solve a @ x = b for square invertible a."""
    if a.shape[0] == 0:
        return zeros((0, b.shape[1]), kind)
    if kind.is_exact:
        try:
            return from_domain_matrix(to_domain_matrix(a, kind).lu_solve(to_domain_matrix(b, kind)), kind)
        except (DMNonInvertibleMatrixError, ZeroDivisionError):
            raise MultiFormError("Matrix is not invertible", "SINGULAR_MATRIX")
    try:
        return scipy.linalg.solve(a, b).astype(kind.dtype)
    except (np.linalg.LinAlgError, ValueError):
        raise MultiFormError("Matrix is not invertible", "SINGULAR_MATRIX")


def is_invertible(mat, kind, policy):
    return mat.shape[0] == mat.shape[1] and rank(mat, kind, policy) == mat.shape[0]


def condition_number(mat, kind):
    """2-norm condition number; exact kinds are evaluated in float."""
    if mat.shape[0] == 0:
        return 1.0
    values = _singular_values(kind.floating().array(mat))
    return float(values[0] / values[-1]) if values[-1] > 0 else float("inf")


def matrix_power(mat, exponent, kind):
    if exponent < 0:
        return matrix_power(inverse(mat, kind), -exponent, kind)
    result = identity(mat.shape[0], kind)
    base = mat
    while exponent:
        if exponent & 1:
            result = matmul(result, base, kind)
        base = matmul(base, base, kind)
        exponent >>= 1
    return result


def block_diagonal(blocks, kind):
    if not kind.is_exact:
        if not blocks:
            return np.zeros((0, 0), dtype=kind.dtype)
        return scipy.linalg.block_diag(*blocks).astype(kind.dtype)
    size = sum(block.shape[0] for block in blocks)
    out = zeros((size, size), kind)
    offset = 0
    for block in blocks:
        d = block.shape[0]
        out[offset:offset + d, offset:offset + d] = block
        offset += d
    return out


def hstack(columns, rows, kind):
    """Concatenate column blocks, tolerating an empty list."""
    parts = [c for c in columns if c.shape[1]]
    if not parts:
        return zeros((rows, 0), kind)
    return kind.array(np.hstack(parts))


def spans_equal(a, b, kind, policy):
    """True when the column spans of a and b coincide (rank test)."""
    rank_a = rank(a, kind, policy)
    return rank_a == rank(b, kind, policy) == rank(hstack([a, b], a.shape[0], kind), kind, policy)


def complete_basis(basis, m, kind, policy):
    """
    Extend the independent columns of `basis` to a basis of the whole
    space with standard vectors; returns only the added columns.
    """
    current = basis
    added = []
    unit = identity(m, kind)
    current_rank = rank(current, kind, policy) if current.size else 0
    for i in range(m):
        if current_rank == m:
            break
        candidate = hstack([current, unit[:, i:i + 1]], m, kind)
        candidate_rank = rank(candidate, kind, policy)
        if candidate_rank > current_rank:
            current, current_rank = candidate, candidate_rank
            added.append(unit[:, i:i + 1])
    return hstack(added, m, kind)
