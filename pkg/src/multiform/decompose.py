"""
Direct-sum structure of forms: radical splitting, block detection in a given
basis, congruence of radical complements and alignment of two decompositions
of the same form.
"""
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from multiform import linalg
from multiform.errors import MultiFormError
from multiform.logging_config import log_context, log_execution_time, setup_logging
from multiform.scalar import TolerancePolicy
from multiform.tensor import (LinearMap, Permutation, change_basis, first_mixed_nonzero, forms_close,
                              is_epsilon_symmetric, permute_slots, radical, restrict)

log = setup_logging(__name__)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    F = F_1 + ... + F_s + 0 as subspace bases.

    blocks holds one m x d_p matrix per summand (columns span U_p); radical
    is m x k. Construction does not validate; call validate().
    """
    blocks: tuple
    radical: np.ndarray
    source: object

    def __post_init__(self):
        kind = self.source.kind
        object.__setattr__(self, "blocks", tuple(kind.array(block) for block in self.blocks))
        kernel = kind.array(self.radical)
        if kernel.size == 0:
            kernel = linalg.zeros((self.source.dim, 0), kind)
        object.__setattr__(self, "radical", kernel)

    @property
    def kind(self):
        return self.source.kind

    @property
    def dims(self):
        return [block.shape[1] for block in self.blocks]

    def basis_matrix(self):
        return linalg.hstack(list(self.blocks) + [self.radical], self.source.dim, self.kind)

    def labels(self):
        labels = [p for p, block in enumerate(self.blocks) for _ in range(block.shape[1])]
        return labels + [-1] * self.radical.shape[1]

    def restricted(self, position):
        return restrict(self.source, self.blocks[position])

    def validate(self, policy=None, require_nonzero=True):
        """
        Check independence, spanning, mixed-slot vanishing and nonzero blocks.

        Raises:
            MultiFormError: INVALID_DECOMPOSITION
        """
        policy = policy or TolerancePolicy.default()
        m = self.source.dim
        for block in list(self.blocks) + [self.radical]:
            if block.shape[0] != m:
                raise MultiFormError(f"Basis vectors must have length {m}", "INVALID_DECOMPOSITION")
        basis = self.basis_matrix()
        if basis.shape[1] != m or not linalg.is_invertible(basis, self.kind, policy):
            raise MultiFormError("Blocks and radical are not a basis of the space", "INVALID_DECOMPOSITION",
                                 columns=basis.shape[1])
        adapted = change_basis(self.source, LinearMap(self.kind, basis))
        index = first_mixed_nonzero(adapted, self.labels(), policy)
        if index is not None:
            raise MultiFormError(f"Mixed coefficient at {index} does not vanish", "INVALID_DECOMPOSITION",
                                 index=index, value=self.kind.format(adapted.coeffs[index]))
        if require_nonzero:
            for position in range(len(self.blocks)):
                if self.restricted(position).is_zero(policy):
                    raise MultiFormError(f"Block {position} is a zero summand", "INVALID_DECOMPOSITION",
                                         block=position)
        return self


@dataclass(frozen=True, eq=False)
class Alignment:
    """permutation[p] is the block of the second decomposition matched to block p of the first."""
    permutation: tuple
    congruences: tuple
    transition: np.ndarray
    subspace_checks: tuple


def split_radical(form, policy=None):
    """
    Returns:
        tuple: (complement basis, radical basis) as column matrices
    """
    policy = policy or TolerancePolicy.default()
    kernel = radical(form, policy)
    return linalg.complete_basis(kernel, form.dim, form.kind, policy), kernel


def _check_complement(basis, kernel, form, policy, name):
    m = form.dim
    if basis.shape[0] != m or basis.shape[1] + kernel.shape[1] != m:
        raise MultiFormError(f"{name} has {basis.shape[1]} vectors, a complement needs {m - kernel.shape[1]}",
                             "NOT_A_COMPLEMENT")
    joint = linalg.hstack([basis, kernel], m, form.kind)
    if not linalg.is_invertible(joint, form.kind, policy):
        raise MultiFormError(f"{name} meets the radical", "NOT_A_COMPLEMENT")
    return joint


def radical_complement_congruence(form, basis_a, basis_b, policy=None):
    """
    Map from coordinates on complement A to coordinates on complement B
    sending u_i to its projection onto B along the radical.

    Returns:
        LinearMap: phi with restrict(F, A) = change_basis(restrict(F, B), phi)

    Raises:
        MultiFormError: NOT_A_COMPLEMENT
    """
    policy = policy or TolerancePolicy.default()
    kind = form.kind
    basis_a, basis_b = kind.array(basis_a), kind.array(basis_b)
    kernel = radical(form, policy)
    _check_complement(basis_a, kernel, form, policy, "basisA")
    joint_b = _check_complement(basis_b, kernel, form, policy, "basisB")
    coords = linalg.solve(joint_b, basis_a, kind)
    return LinearMap(kind, coords[:basis_b.shape[1], :])


@log_execution_time(log)
def support_blocks(form, policy=None):
    """
    Split along the connected components of the support graph of the
    coefficients; basis vectors touching no nonzero coefficient form the radical.
    """
    policy = policy or TolerancePolicy.default()
    m, kind = form.dim, form.kind
    if m == 0:
        return Decomposition((), linalg.zeros((0, 0), kind), form)
    scale = linalg.max_abs(form.coeffs, kind)
    adjacency = np.zeros((m, m), dtype=bool)
    touched = np.zeros(m, dtype=bool)
    for index in np.ndindex(form.coeffs.shape):
        if kind.is_negligible(form.coeffs[index], policy, scale):
            continue
        members = sorted(set(index))
        touched[members] = True
        for i, j in itertools.combinations(members, 2):
            adjacency[i, j] = adjacency[j, i] = True
    _, labels = connected_components(csr_matrix(adjacency), directed=False)
    unit = linalg.identity(m, kind)
    blocks, seen = [], set()
    for i in range(m):
        if not touched[i] or labels[i] in seen:
            continue
        seen.add(labels[i])
        members = [j for j in range(m) if labels[j] == labels[i]]
        blocks.append(unit[:, members])
    rest = [i for i in range(m) if not touched[i]]
    return Decomposition(tuple(blocks), unit[:, rest], form)


def count_nonzero_summands(form, policy=None):
    if form.arity < 2:
        raise MultiFormError("Arity must be at least 2", "ARITY_MISMATCH")
    return len(support_blocks(form, policy).blocks)


def same_span_with_radical(first, second, kernel, kind, policy=None):
    """span(U + U_0) == span(V + U_0), exact rank test for exact kinds."""
    policy = policy or TolerancePolicy.default()
    rows = kernel.shape[0]
    return linalg.spans_equal(linalg.hstack([first, kernel], rows, kind),
                              linalg.hstack([second, kernel], rows, kind), kind, policy)


def layer_ranks(form, basis, policy=None):
    """
    Sum over sigma in S_n and over the last index k of the rank of the layer
    F^sigma(., ..., ., u_k) of the form restricted to `basis`.
    """
    policy = policy or TolerancePolicy.default()
    local = restrict(form, basis)
    d = local.dim
    total = 0
    for images in itertools.permutations(range(local.arity)):
        permuted = permute_slots(local, Permutation(images)).coeffs
        for k in range(d):
            layer = permuted[..., k].reshape(d, -1)
            total += linalg.rank(form.kind.array(layer), form.kind, policy)
    return total


def _offsets(dims):
    return np.concatenate([[0], np.cumsum(dims)]).astype(int)


def _first_off_diagonal(transition, order, rows, cols, kind, policy):
    """Reduce each row strip by its diagonal block and return the first surviving off-diagonal entry."""
    scale = max(1.0, linalg.max_abs(transition, kind))
    reduced = []
    for p, q in enumerate(order):
        strip = transition[rows[p]:rows[p + 1], :]
        diagonal = strip[:, cols[q]:cols[q + 1]]
        normalized = linalg.matmul(linalg.inverse(diagonal, kind), strip, kind)
        reduced.append(normalized)
        for other, q_other in enumerate(order):
            if other == p:
                continue
            block = normalized[:, cols[q_other]:cols[q_other + 1]]
            for index in np.ndindex(block.shape):
                if not kind.is_negligible(block[index], policy, scale):
                    return None, {
                        "strip": p,
                        "block": q_other,
                        "entry": (int(rows[p] + index[0]), int(cols[q_other] + index[1])),
                        "value": kind.format(block[index]),
                    }
    return reduced, None


def align_decompositions(form, first, second, policy=None):
    """
    Match the blocks of two decompositions of the same form.

    The transition matrix from the first block basis (modulo the radical) to
    the second is reduced strip by strip until its diagonal blocks are the
    identity; every off-diagonal block must then vanish.

    Returns:
        Alignment: permutation, per-block congruence maps, the reduced transition matrix
            and the per-block subspace checks

    Raises:
        MultiFormError: BLOCK_COUNT_MISMATCH, INVALID_DECOMPOSITION, OFF_DIAGONAL_NONZERO
    """
    policy = policy or TolerancePolicy.default()
    kind, m = form.kind, form.dim
    with log_context(log, "align_decompositions", dims=first.dims):
        if sorted(first.dims) != sorted(second.dims):
            raise MultiFormError(f"Block dimensions differ: {first.dims} vs {second.dims}", "BLOCK_COUNT_MISMATCH",
                                 first=first.dims, second=second.dims)
        kernel = radical(form, policy)
        block_dim = sum(first.dims)
        if block_dim + kernel.shape[1] != m:
            raise MultiFormError("Blocks plus radical do not fill the space", "INVALID_DECOMPOSITION")
        first_basis = linalg.hstack(list(first.blocks), m, kind)
        second_basis = linalg.hstack(list(second.blocks), m, kind)
        joint = linalg.hstack([first_basis, kernel], m, kind)
        if not linalg.is_invertible(joint, kind, policy):
            raise MultiFormError("First decomposition does not complement the radical", "INVALID_DECOMPOSITION")
        transition = linalg.solve(joint, second_basis, kind)[:block_dim, :]
        rows, cols = _offsets(first.dims), _offsets(second.dims)

        failure = None
        for order in itertools.permutations(range(len(first.blocks))):
            if any(first.dims[p] != second.dims[q] for p, q in enumerate(order)):
                continue
            diagonals = [transition[rows[p]:rows[p + 1], cols[q]:cols[q + 1]] for p, q in enumerate(order)]
            if not all(linalg.is_invertible(block, kind, policy) for block in diagonals):
                continue
            reduced, problem = _first_off_diagonal(transition, order, rows, cols, kind, policy)
            if problem is None:
                return _certify(form, first, second, order, diagonals, reduced, cols, kernel, policy)
            failure = failure or problem

        details = failure or {"reason": "no block permutation gives invertible diagonal blocks"}
        details["layer_ranks"] = (
            [layer_ranks(form, block, policy) for block in first.blocks],
            [layer_ranks(form, block, policy) for block in second.blocks],
        )
        log.warning("Alignment failed: %s", details)
        raise MultiFormError("Transition matrix has a nonzero off-diagonal block", "OFF_DIAGONAL_NONZERO",
                             **details)


def _certify(form, first, second, order, diagonals, reduced, cols, kernel, policy):
    kind = form.kind
    congruences, checks = [], []
    for p, q in enumerate(order):
        phi = LinearMap(kind, linalg.inverse(diagonals[p], kind))
        source = restrict(form, first.blocks[p])
        target = change_basis(restrict(form, second.blocks[q]), phi)
        if forms_close(source, target, policy) is not None:
            raise MultiFormError(f"Block {p} is not congruent to block {q}", "NUMERICAL_INSTABILITY", block=p)
        if not same_span_with_radical(first.blocks[p], second.blocks[q], kernel, kind, policy):
            raise MultiFormError(f"Block {p} and block {q} span different subspaces modulo the radical",
                                 "OFF_DIAGONAL_NONZERO", block=p)
        congruences.append(phi)
        checks.append(True)
    stacked = np.vstack(reduced) if reduced else linalg.zeros((0, 0), kind)
    column_order = [c for q in order for c in range(cols[q], cols[q + 1])]
    transition = kind.array(stacked[:, column_order]) if stacked.size else stacked
    log.info("Aligned %d blocks with permutation %s", len(order), order)
    return Alignment(tuple(order), tuple(congruences), transition, tuple(checks))


def _splits_over(disc, kind, policy):
    """Whether a binary quadratic with this discriminant has two distinct roots over the kind."""
    if kind.is_exact:
        if not disc:
            return False
        try:
            kind.nth_root(disc, 2)
        except MultiFormError:
            return False
        return True
    if kind.is_complex:
        return abs(disc) > policy.threshold(1.0)
    return disc > policy.threshold(1.0)


@log_execution_time(log)
def is_indecomposable(form, policy=None):
    """
    Decide indecomposability for dimension <= 2.

    A 2-dimensional form splits as F_1 + F_2 on two lines only when it is
    symmetric, and then F = l_1^n + l_2^n for independent linear forms. The
    binary quadratics q with sum_j q_j c_(i+j) = 0 for the symmetric
    coefficients c_k vanish exactly at the directions of such l_1, l_2, so
    the form splits over the kind iff that kernel is at least 2-dimensional,
    or it is a single q with two distinct roots in the kind.

    Raises:
        MultiFormError: UNCERTIFIABLE for larger dimensions
    """
    policy = policy or TolerancePolicy.default()
    kind, n = form.kind, form.arity
    if form.dim == 0:
        return False
    if form.dim == 1:
        return not form.is_zero(policy)
    if form.dim > 2:
        raise MultiFormError(f"Indecomposability of a {form.dim}-dimensional block is not decidable here",
                             "UNCERTIFIABLE", dim=form.dim)
    if not is_epsilon_symmetric(form, 1, policy):
        return True
    if n == 2:
        # symmetric bilinear forms diagonalize
        return False
    coeffs = [form.coeffs[(0,) * (n - k) + (1,) * k] for k in range(n + 1)]
    catalecticant = kind.array([[coeffs[i], coeffs[i + 1], coeffs[i + 2]] for i in range(n - 1)])
    kernel = linalg.nullspace(catalecticant, kind, policy)
    if kernel.shape[1] != 1:
        return kernel.shape[1] == 0
    q0, q1, q2 = kernel[:, 0]
    disc = kind.convert(q1 * q1 - 4 * q0 * q2)
    log.debug("Apolar quadratic discriminant %s", kind.format(disc))
    return not _splits_over(disc, kind, policy)
