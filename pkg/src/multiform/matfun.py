"""
Spectral splitting and inverse-root polynomials.

For a map T with a single spectral group the functions here build a
polynomial f with f(T)^m T = I: a truncated binomial series of x^(-1/m)
around the eigenvalue, and over the reals a conjugate-pair variant that
keeps every coefficient real.
"""
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from multiform import linalg
from multiform.config import load_config
from multiform.errors import MultiFormError
from multiform.logging_config import setup_logging
from multiform.scalar import ScalarKind, TolerancePolicy
from multiform.tensor import LinearMap

log = setup_logging(__name__)

MODES = ("complex", "real")


@dataclass(frozen=True, eq=False)
class SpectralGroup:
    """
    One invariant subspace of a spectral split.

    eigenvalue is a value of the split's kind, or for a conjugate pair the
    value a+ib (b > 0) in the complexified kind. multiplicity counts each
    eigenvalue once, so a pair group spans 2 * multiplicity dimensions.
    """
    eigenvalue: object
    multiplicity: int
    basis: np.ndarray
    is_pair: bool = False

    @property
    def dim(self):
        return self.basis.shape[1]


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    kind: ScalarKind
    mode: str
    groups: tuple

    @property
    def dim(self):
        return sum(group.dim for group in self.groups)

    @property
    def dims(self):
        return [group.dim for group in self.groups]

    def basis_matrix(self):
        size = self.groups[0].basis.shape[0] if self.groups else 0
        return linalg.hstack([group.basis for group in self.groups], size, self.kind)

    def labels(self):
        return [g for g, group in enumerate(self.groups) for _ in range(group.dim)]

    def with_signs(self, signs):
        """Same subspaces with real eigenvalues multiplied by the given signs."""
        groups = []
        for group, sign in zip(self.groups, signs):
            if sign == 1:
                groups.append(group)
            elif group.is_pair:
                raise MultiFormError("Cannot flip the sign of a conjugate-pair group", "INVALID_SPEC")
            else:
                groups.append(replace(group, eigenvalue=-group.eigenvalue))
        return SpectralSplit(self.kind, self.mode, tuple(groups))


def restricted_maps(split, linear_map):
    """Diagonal blocks of S^-1 T S for the split basis S, one per group."""
    transition = split.basis_matrix()
    entries = linear_map.as_kind(split.kind).entries
    local = linalg.matmul(linalg.solve(transition, entries, split.kind), transition, split.kind)
    blocks, offset = [], 0
    for group in split.groups:
        blocks.append(LinearMap(split.kind, local[offset:offset + group.dim, offset:offset + group.dim]))
        offset += group.dim
    return blocks


def assemble(split, blocks):
    """S diag(blocks) S^-1 for the split basis S."""
    transition = split.basis_matrix()
    middle = linalg.block_diagonal([block.entries for block in blocks], split.kind)
    product = linalg.matmul(transition, middle, split.kind)
    return LinearMap(split.kind, linalg.matmul(product, linalg.inverse(transition, split.kind), split.kind))


def _sort_key(kind, group):
    value = kind.complexified().to_complex(group.eigenvalue) if group.is_pair else kind.to_complex(group.eigenvalue)
    return (group.is_pair, value.real, value.imag)


def _quadratic(entries, a, b, kind):
    """T^2 - 2aT + (a^2 + b^2) I."""
    m = entries.shape[0]
    square = linalg.matmul(entries, entries, kind)
    return kind.array(square - entries * (2 * a) + linalg.identity(m, kind) * (a * a + b * b))


def _exact_groups(entries, kind, mode, policy):
    m = entries.shape[0]
    factors = linalg.to_domain_matrix(entries, kind).charpoly_factor_list()
    groups = []
    for coeffs, mult in factors:
        if len(coeffs) == 2:
            eigenvalue = -coeffs[1] / coeffs[0]
            shifted = kind.array(entries - linalg.identity(m, kind) * eigenvalue)
            basis = linalg.nullspace(linalg.matrix_power(shifted, mult, kind), kind, policy)
            groups.append(SpectralGroup(eigenvalue, mult, basis))
        elif len(coeffs) == 3 and mode == "real":
            lead, linear, const = coeffs
            a = -linear / (2 * lead)
            try:
                b = kind.nth_root(const / lead - a * a, 2)
            except MultiFormError:
                raise MultiFormError("Conjugate pair with irrational imaginary part", "EIGENVALUE_NOT_FOUND",
                                     factor=[kind.format(c) for c in coeffs])
            quadratic = _quadratic(entries, a, b, kind)
            basis = linalg.nullspace(linalg.matrix_power(quadratic, mult, kind), kind, policy)
            groups.append(SpectralGroup(kind.make_complex(a, b), mult, basis, is_pair=True))
        else:
            raise MultiFormError(f"Characteristic polynomial does not split over {kind.value}",
                                 "EIGENVALUE_NOT_FOUND", factor=[kind.format(c) for c in coeffs])
    return groups


def _clusters(values, cluster_tol, policy):
    """Connected components of the 'relatively close' graph on eigenvalues."""
    if values.size == 0:
        return []
    distance = np.abs(values[:, None] - values[None, :])
    reach = cluster_tol * np.maximum(np.abs(values)[:, None], np.abs(values)[None, :]) + policy.abs_tol
    count, labels = connected_components(csr_matrix(distance <= reach), directed=False)
    return [values[labels == label] for label in range(count)]


def _trailing_vectors(mat, count, kind):
    _, _, vh = scipy.linalg.svd(mat)
    return np.ascontiguousarray(vh[mat.shape[1] - count:].conj().T).astype(kind.dtype)


@dataclass(frozen=True, eq=False)
class _Cluster:
    """Eigenvalues merged by distance; pair clusters hold the b > 0 member of each conjugate pair."""
    values: np.ndarray
    pair: bool

    @property
    def dim(self):
        return self.values.size * (2 if self.pair else 1)


def _annihilator(entries, clusters, kind):
    eye = np.eye(entries.shape[0], dtype=kind.dtype)
    product = eye.copy()
    for cluster in clusters:
        for mu in cluster.values:
            if cluster.pair:
                product = product @ _quadratic(entries, mu.real, mu.imag, kind)
            else:
                product = product @ (entries - (mu if kind.is_complex else mu.real) * eye)
    return product


def _cluster_basis(entries, clusters, kind):
    return _trailing_vectors(_annihilator(entries, clusters, kind), sum(c.dim for c in clusters), kind)


def _dependent_components(bases, overlap):
    """Components of the graph linking clusters whose subspaces are nearly dependent."""
    count = len(bases)
    linked = np.eye(count, dtype=bool)
    for i in range(count):
        for j in range(i + 1, count):
            smallest = scipy.linalg.svd(np.hstack([bases[i], bases[j]]), compute_uv=False)[-1]
            linked[i, j] = linked[j, i] = smallest < overlap
    _, labels = connected_components(csr_matrix(linked), directed=False)
    return [np.flatnonzero(labels == label) for label in np.unique(labels)]


def _merged_group(entries, members, kind, cluster_tol):
    """
    One group from clusters that are pieces of a defective eigenvalue.

    Rounding splits a k x k Jordan block into k eigenvalues about eps^(1/k)
    apart whose eigenvectors nearly coincide. The merged subspace must be
    annihilated by (T - lambda)^d, or by the pair quadratic to the power d/2.
    """
    basis = _cluster_basis(entries, members, kind)
    dim = basis.shape[1]
    scale = max(1.0, linalg.max_abs(entries, kind))
    upper = np.concatenate([member.values for member in members])
    # a split real Jordan block can surface as pairs with tiny imaginary parts
    if all(member.pair for member in members) and np.mean(upper).imag > cluster_tol ** 0.25 * scale:
        eigenvalue = complex(np.mean(upper))
        power = np.linalg.matrix_power(_quadratic(entries, eigenvalue.real, eigenvalue.imag, kind), dim // 2)
        group = SpectralGroup(eigenvalue, int(upper.size), basis, is_pair=True)
    else:
        values = np.concatenate([np.concatenate([member.values, member.values.conj()]) if member.pair
                                 else member.values for member in members])
        eigenvalue = complex(np.mean(values)) if kind.is_complex else float(np.mean(values).real)
        power = np.linalg.matrix_power(entries - eigenvalue * np.eye(entries.shape[0], dtype=kind.dtype), dim)
        group = SpectralGroup(eigenvalue, dim, basis)
    defect = float(np.max(np.abs(power @ basis)))
    if defect > cluster_tol * scale ** dim:
        raise MultiFormError(f"Spectral groups of dimensions {[m.dim for m in members]} are numerically dependent",
                             "NOT_CONVERGED", residual=defect)
    log.debug("Merged %d eigenvalue clusters into one defective group of dimension %d", len(members), dim)
    return group


def _float_groups(entries, kind, mode, policy, cluster_tol):
    values = scipy.linalg.eigvals(entries)
    if not np.all(np.isfinite(values)):
        raise MultiFormError("Eigenvalue computation did not converge", "NOT_CONVERGED")
    if mode == "complex":
        clusters = [_Cluster(cluster, False) for cluster in _clusters(values, cluster_tol, policy)]
    else:
        scale = max(1.0, float(np.max(np.abs(values))))
        real_mask = np.abs(values.imag) <= cluster_tol * scale
        upper = values[~real_mask & (values.imag > 0)]
        if upper.size != int(np.sum(~real_mask & (values.imag < 0))):
            raise MultiFormError("Nonreal eigenvalues are not closed under conjugation", "NOT_CONVERGED")
        clusters = [_Cluster(cluster, False)
                    for cluster in _clusters(values[real_mask].real.astype(complex), cluster_tol, policy)]
        clusters += [_Cluster(cluster, True) for cluster in _clusters(upper, cluster_tol, policy)]

    bases = [_cluster_basis(entries, [cluster], kind) for cluster in clusters]
    groups = []
    for component in _dependent_components(bases, cluster_tol ** 0.25):
        if component.size > 1:
            groups.append(_merged_group(entries, [clusters[i] for i in component], kind, cluster_tol))
            continue
        cluster, basis = clusters[component[0]], bases[component[0]]
        if cluster.pair:
            groups.append(SpectralGroup(complex(np.mean(cluster.values)), int(cluster.values.size), basis,
                                        is_pair=True))
        elif kind.is_complex:
            groups.append(SpectralGroup(complex(np.mean(cluster.values)), int(cluster.values.size), basis))
        else:
            groups.append(SpectralGroup(float(np.mean(cluster.values.real)), int(cluster.values.size), basis))
    return groups


def _check_invariance(entries, groups, kind, cluster_tol, condition_limit):
    scale = max(1.0, linalg.max_abs(entries, kind))
    for position, group in enumerate(groups):
        image = entries @ group.basis
        coords, *_ = scipy.linalg.lstsq(group.basis, image)
        residual = float(np.max(np.abs(image - group.basis @ coords))) if image.size else 0.0
        if residual > cluster_tol * scale * 10:
            raise MultiFormError(f"Spectral subspace {position} is not invariant (residual {residual:.3e})",
                                 "NOT_CONVERGED", group=position, residual=residual)
    transition = np.hstack([group.basis for group in groups])
    if linalg.condition_number(transition, kind) > condition_limit:
        raise MultiFormError("Spectral subspaces are numerically dependent", "NOT_CONVERGED")


def spectral_split(linear_map, mode="complex", policy=None, cluster_tol=None):
    """
    Split the space into generalized eigenspaces of T.

    Args:
        linear_map (LinearMap): Square map T
        mode (str): 'complex' (one group per eigenvalue) or 'real' (one group
            per real eigenvalue or conjugate pair)
        policy (TolerancePolicy, optional): Rank decisions for float kinds
        cluster_tol (float, optional): Relative distance merging float eigenvalues

    Returns:
        SpectralSplit: Groups in a deterministic order (real groups first, then by value)

    Raises:
        MultiFormError: EIGENVALUE_NOT_FOUND (exact kinds), NOT_CONVERGED (float kinds)
    """
    config = load_config()
    policy = policy or TolerancePolicy.default()
    cluster_tol = config.cluster_tol if cluster_tol is None else cluster_tol
    if mode not in MODES:
        raise MultiFormError(f"Unknown spectral mode: {mode}", "INVALID_SPEC")
    if linear_map.rows != linear_map.cols:
        raise MultiFormError("Spectral split needs a square map", "DIMENSION_MISMATCH")
    if mode == "real" and linear_map.kind.is_complex:
        raise MultiFormError("Real spectral split of a complex map", "KIND_MISMATCH")
    kind = linear_map.kind.complexified() if mode == "complex" else linear_map.kind
    entries = linear_map.as_kind(kind).entries
    if entries.shape[0] == 0:
        return SpectralSplit(kind, mode, ())
    if kind.is_exact:
        groups = _exact_groups(entries, kind, mode, policy)
    else:
        groups = _float_groups(entries, kind, mode, policy, cluster_tol)
        _check_invariance(entries, groups, kind, cluster_tol, config.condition_limit)
    groups.sort(key=lambda group: _sort_key(kind, group))
    split = SpectralSplit(kind, mode, tuple(groups))
    if split.dim != entries.shape[0]:
        raise MultiFormError(f"Spectral subspaces span {split.dim} of {entries.shape[0]} dimensions",
                             "NOT_CONVERGED")
    log.debug("Spectral split (%s) dims %s", mode, split.dims)
    return split


def _trim(coeffs):
    coeffs = list(coeffs)
    while len(coeffs) > 1 and not coeffs[-1]:
        coeffs.pop()
    return coeffs


def poly_add(p, q, kind):
    size = max(len(p), len(q))
    p = list(p) + [kind.zero] * (size - len(p))
    q = list(q) + [kind.zero] * (size - len(q))
    return _trim(kind.convert(a + b) for a, b in zip(p, q))


def poly_scale(p, value, kind):
    return _trim(kind.convert(c * value) for c in p)


def poly_mul(p, q, kind):
    out = [kind.zero] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] = kind.convert(out[i + j] + a * b)
    return _trim(out)


def poly_compose(p, q, kind):
    """Coefficients of p(q(x))."""
    result = [p[-1]]
    for c in reversed(p[:-1]):
        result = poly_add(poly_mul(result, q, kind), [c], kind)
    return result


def poly_mod(p, divisor, kind):
    """Remainder of p modulo a monic divisor."""
    remainder = list(p)
    degree = len(divisor) - 1
    while len(remainder) - 1 >= degree and degree > 0:
        lead = remainder[-1]
        shift = len(remainder) - 1 - degree
        for k, c in enumerate(divisor):
            remainder[shift + k] = kind.convert(remainder[shift + k] - lead * c)
        remainder.pop()
    return _trim(remainder) if remainder else [kind.zero]


@dataclass(frozen=True)
class Polynomial:
    """sum_k coeffs[k] * (x - center)^k."""
    kind: ScalarKind
    coeffs: tuple
    center: object = 0

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise MultiFormError("Polynomial needs at least one coefficient", "INVALID_SPEC")
        object.__setattr__(self, "coeffs", tuple(self.kind.convert(c) for c in self.coeffs))
        object.__setattr__(self, "center", self.kind.convert(self.center))

    @property
    def degree(self):
        return len(_trim(self.coeffs)) - 1

    def to_monomial(self):
        """The same polynomial expanded in powers of x (constant term first)."""
        if not self.center:
            return self
        shift = [-self.center, self.kind.one]
        return Polynomial(self.kind, tuple(poly_compose(list(self.coeffs), shift, self.kind)))

    def __call__(self, x):
        x = self.kind.convert(x) - self.center
        result = self.kind.zero
        for c in reversed(self.coeffs):
            result = result * x + c
        return self.kind.convert(result)


def poly_apply(poly, linear_map):
    """f(T) by Horner's rule in powers of (T - center I)."""
    kind = poly.kind if poly.kind.is_complex else linear_map.kind
    entries = linear_map.as_kind(kind).entries
    m = entries.shape[0]
    eye = linalg.identity(m, kind)
    shifted = kind.array(entries - eye * kind.convert(poly.center))
    result = kind.array(eye * kind.convert(poly.coeffs[-1]))
    for c in reversed(poly.coeffs[:-1]):
        result = kind.array(linalg.matmul(result, shifted, kind) + eye * kind.convert(c))
    return LinearMap(kind, result)


def _taylor_inverse_root(eigenvalue, order, terms, kind):
    """Coefficients of x^(-1/order) expanded around eigenvalue, first `terms` terms."""
    base = kind.one / kind.nth_root(eigenvalue, order)
    exponent = kind.convert(Fraction(-1, order)) if kind.is_exact else -1.0 / order
    inverse = kind.one / eigenvalue
    coeffs, binomial, power = [], kind.one, kind.one
    for k in range(max(terms, 1)):
        coeffs.append(kind.convert(base * binomial * power))
        binomial = kind.convert(binomial * (exponent - k) / (k + 1))
        power = kind.convert(power * inverse)
    return coeffs


def _check_single_group(entries, eigenvalue, kind, policy):
    m = entries.shape[0]
    shifted = kind.array(entries - linalg.identity(m, kind) * eigenvalue)
    nilpotent = linalg.matrix_power(shifted, m, kind)
    if kind.is_exact:
        if not linalg.is_zero(nilpotent, kind, policy):
            raise MultiFormError(f"Map has eigenvalues other than {kind.format(eigenvalue)}",
                                 "EIGENVALUE_NOT_FOUND")
    elif not linalg.is_zero(nilpotent, kind, TolerancePolicy(1e-6, 1e-6),
                            scale=max(1.0, linalg.max_abs(entries, kind)) ** m):
        log.warning("T - %s I is far from nilpotent; inverse root is a truncation", kind.format(eigenvalue))


def inverse_root_poly_complex(linear_map, eigenvalue, order, policy=None):
    """
    Polynomial f with f(T)^order T = I for T with the single eigenvalue given.

    Returns:
        Polynomial: Truncated binomial series centered at the eigenvalue

    Raises:
        MultiFormError: SINGULAR_INPUT, NO_ROOT_IN_FIELD
    """
    policy = policy or TolerancePolicy.default()
    kind = linear_map.kind.complexified()
    entries = linear_map.as_kind(kind).entries
    eigenvalue = kind.convert(eigenvalue)
    if not eigenvalue:
        raise MultiFormError("Inverse root of a singular map", "SINGULAR_INPUT")
    _check_single_group(entries, eigenvalue, kind, policy)
    coeffs = _taylor_inverse_root(eigenvalue, order, entries.shape[0], kind)
    return Polynomial(kind, tuple(coeffs), eigenvalue)


def _imaginary_unit_poly(entries, a, b, modulus, terms, kind):
    """
    Real polynomial p with p(T)^2 = -I and p = i on the a+ib eigenspace,
    by iterating x -> (3/2)x + (1/2)x^3 from (x - a)/b modulo `modulus`.
    """
    p = [kind.convert(-a / b), kind.convert(kind.one / b)]
    limit = math.ceil(math.log2(terms)) + 1 if terms > 1 else 1
    half, three_halves = kind.convert(Fraction(1, 2)), kind.convert(Fraction(3, 2))
    eye = linalg.identity(entries.shape[0], kind)

    def defect(poly):
        value = poly_apply(Polynomial(kind, tuple(poly)), LinearMap(kind, entries)).entries
        return kind.array(linalg.matmul(value, value, kind) + eye)

    for round_number in range(limit + 1):
        residual = defect(p)
        if kind.is_exact and linalg.is_zero(residual, kind, None):
            log.debug("Imaginary unit polynomial found after %d rounds", round_number)
            return p
        if round_number == limit:
            break
        cube = poly_mul(poly_mul(p, p, kind), p, kind)
        p = poly_mod(poly_add(poly_scale(p, three_halves, kind), poly_scale(cube, half, kind), kind), modulus, kind)
    if not kind.is_exact:
        size = max(1.0, linalg.max_abs(entries, kind)) ** 2
        if linalg.max_abs(residual, kind) <= 1e-6 * size:
            return p
    raise MultiFormError(f"Nilpotent reduction did not converge in {limit} rounds", "NOT_CONVERGED",
                         rounds=limit)


def inverse_root_poly_real(linear_map, eigenvalue, order, pair=False, policy=None):
    """
    Real polynomial f with f(T)^order T = I.

    Args:
        linear_map (LinearMap): Real map with a single spectral group
        eigenvalue: Positive real eigenvalue, or a+ib for a conjugate pair
        order (int): Root order m
        pair (bool): Whether the group is a conjugate pair

    Raises:
        MultiFormError: NEGATIVE_REAL_EIGENVALUE, SINGULAR_INPUT, NO_ROOT_IN_FIELD, NOT_CONVERGED
    """
    policy = policy or TolerancePolicy.default()
    kind = linear_map.kind
    if kind.is_complex:
        raise MultiFormError("Real inverse root of a complex map", "KIND_MISMATCH")
    entries = linear_map.entries
    if not pair:
        eigenvalue = kind.convert(eigenvalue)
        if not eigenvalue:
            raise MultiFormError("Inverse root of a singular map", "SINGULAR_INPUT")
        if eigenvalue < 0:
            raise MultiFormError("Real inverse root needs a positive eigenvalue", "NEGATIVE_REAL_EIGENVALUE",
                                 eigenvalue=kind.format(eigenvalue))
        _check_single_group(entries, eigenvalue, kind, policy)
        coeffs = _taylor_inverse_root(eigenvalue, order, entries.shape[0], kind)
        return Polynomial(kind, tuple(coeffs), eigenvalue)

    complex_kind = kind.complexified()
    eigenvalue = complex_kind.convert(eigenvalue)
    a, b = complex_kind.real_part(eigenvalue), complex_kind.imag_part(eigenvalue)
    if not b:
        raise MultiFormError("Conjugate pair needs a nonzero imaginary part", "INVALID_SPEC")
    if b < 0:
        b = -b
        eigenvalue = kind.make_complex(a, b)
    if entries.shape[0] % 2:
        raise MultiFormError("Conjugate-pair block must have even dimension", "DIMENSION_MISMATCH")
    terms = entries.shape[0] // 2
    quadratic = [kind.convert(a * a + b * b), kind.convert(-2 * a), kind.one]
    modulus = [kind.one]
    for _ in range(terms):
        modulus = poly_mul(modulus, quadratic, kind)
    unit = _imaginary_unit_poly(entries, a, b, modulus, terms, kind)

    series = _taylor_inverse_root(eigenvalue, order, terms, complex_kind)
    expanded = Polynomial(complex_kind, tuple(series), eigenvalue).to_monomial().coeffs
    real = [complex_kind.real_part(c) for c in expanded]
    imag = [complex_kind.imag_part(c) for c in expanded]
    coeffs = poly_mod(poly_add(real, poly_mul(unit, imag, kind), kind), modulus, kind)
    poly = Polynomial(kind, tuple(coeffs))
    _check_root(poly, linear_map, order)
    return poly


def _check_root(poly, linear_map, order):
    """
    Raises:
        MultiFormError: EIGENVALUE_NOT_FOUND (exact) or NUMERICAL_INSTABILITY
            (float) when f(T)^order T is not the identity
    """
    kind = linear_map.kind
    entries = linear_map.entries
    root = poly_apply(poly, linear_map).entries
    product = linalg.matmul(linalg.matrix_power(root, order, kind), entries, kind)
    defect = kind.array(product - linalg.identity(entries.shape[0], kind))
    scale = max(1.0, linalg.max_abs(root, kind)) ** order * max(1.0, linalg.max_abs(entries, kind))
    if linalg.is_zero(defect, kind, TolerancePolicy(1e-6, 1e-6), scale=scale):
        return
    residual = linalg.max_abs(defect, kind)
    if kind.is_exact:
        raise MultiFormError("Map is not a single conjugate-pair group", "EIGENVALUE_NOT_FOUND", residual=residual)
    raise MultiFormError(f"Real inverse root misses by {residual:.3e}", "NUMERICAL_INSTABILITY", residual=residual)
