"""
Dense n-linear forms on a single m-dimensional space.

Coefficient tensors are numpy arrays of shape (m,)*n in row-major order;
entry (i1,...,in) is F(u_i1,...,u_in) for the fixed basis u_0..u_{m-1}.
A LinearMap's columns are images of basis vectors, so change_basis(F, C)
expresses F in the basis v_j = sum_i u_i C[i, j].
"""
import itertools
from dataclasses import dataclass, field

import numpy as np

from multiform import linalg
from multiform.errors import MultiFormError
from multiform.logging_config import setup_logging
from multiform.scalar import Scalar, TolerancePolicy

log = setup_logging(__name__)


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a predicate; falsy results carry a witness describing the violation."""
    holds: bool
    witness: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds


@dataclass(frozen=True, eq=False)
class LinearMap:
    kind: object
    entries: np.ndarray

    def __post_init__(self):
        entries = self.kind.array(self.entries)
        if entries.ndim != 2:
            raise MultiFormError(f"Linear map must be 2-dimensional, got shape {entries.shape}", "DIMENSION_MISMATCH")
        object.__setattr__(self, "entries", _frozen(entries))

    @classmethod
    def identity(cls, m, kind):
        return cls(kind, linalg.identity(m, kind))

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    def __matmul__(self, other):
        _same_kind(self.kind, other.kind)
        if self.cols != other.rows:
            raise MultiFormError(f"Cannot compose {self.entries.shape} with {other.entries.shape}",
                                 "DIMENSION_MISMATCH")
        return LinearMap(self.kind, linalg.matmul(self.entries, other.entries, self.kind))

    def inverse(self):
        return LinearMap(self.kind, linalg.inverse(self.entries, self.kind))

    def scaled(self, value):
        return LinearMap(self.kind, self.kind.array(self.entries * self.kind.convert(value)))

    def as_kind(self, kind):
        return LinearMap(kind, self.entries)

    def apply(self, vector):
        vector = self.kind.array(vector)
        return self.kind.array(self.entries @ vector)

    def equals(self, other, policy=None):
        if self.entries.shape != other.entries.shape:
            return False
        return _first_difference(self.entries, other.entries, self.kind, policy or TolerancePolicy.default()) is None


@dataclass(frozen=True, eq=False)
class MultiForm:
    kind: object
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = self.kind.array(self.coeffs)
        if coeffs.ndim < 2:
            raise MultiFormError(f"Arity must be at least 2, got {coeffs.ndim}", "ARITY_MISMATCH")
        if len(set(coeffs.shape)) > 1:
            raise MultiFormError(f"All slots must share one dimension, got {coeffs.shape}", "DIMENSION_MISMATCH")
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @classmethod
    def zeros(cls, arity, dim, kind):
        return cls(kind, linalg.zeros((dim,) * arity, kind))

    @classmethod
    def from_entries(cls, arity, dim, kind, entries):
        """Build from a mapping {multi-index: value}; omitted indices are zero."""
        coeffs = linalg.zeros((dim,) * arity, kind)
        for index, value in entries.items():
            index = tuple(index)
            if len(index) != arity or not all(0 <= i < dim for i in index):
                raise MultiFormError(f"Index {index} out of range for arity {arity}, dim {dim}", "DIMENSION_MISMATCH")
            coeffs[index] = kind.convert(value)
        return cls(kind, coeffs)

    @property
    def arity(self):
        return self.coeffs.ndim

    @property
    def dim(self):
        return self.coeffs.shape[0]

    def as_kind(self, kind):
        return MultiForm(kind, self.coeffs)

    def scaled(self, value):
        return MultiForm(self.kind, self.kind.array(self.coeffs * self.kind.convert(value)))

    def __add__(self, other):
        _same_kind(self.kind, other.kind)
        if self.coeffs.shape != other.coeffs.shape:
            raise MultiFormError("Cannot add forms of different shapes", "DIMENSION_MISMATCH")
        return MultiForm(self.kind, self.kind.array(self.coeffs + other.coeffs))

    def __sub__(self, other):
        return self + other.scaled(-1)

    def is_zero(self, policy=None):
        return linalg.is_zero(self.coeffs, self.kind, policy or TolerancePolicy.default())

    def equals(self, other, policy=None):
        return forms_close(self, other, policy) is None


@dataclass(frozen=True)
class Permutation:
    """sigma as images[k] = sigma(k); sigma * pi applies sigma first, then pi."""
    images: tuple

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise MultiFormError(f"Not a permutation: {images}", "INVALID_PERMUTATION")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(n)))

    @classmethod
    def transposition(cls, n, i, j):
        images = list(range(n))
        images[i], images[j] = j, i
        return cls(tuple(images))

    @property
    def arity(self):
        return len(self.images)

    def __call__(self, k):
        return self.images[k]

    def __mul__(self, other):
        if self.arity != other.arity:
            raise MultiFormError("Cannot compose permutations of different arity", "ARITY_MISMATCH")
        return Permutation(tuple(other.images[k] for k in self.images))

    def inverse(self):
        inverse = [0] * self.arity
        for k, image in enumerate(self.images):
            inverse[image] = k
        return Permutation(tuple(inverse))

    def sign(self):
        visited, sign = set(), 1
        for start in range(self.arity):
            length = 0
            k = start
            while k not in visited:
                visited.add(k)
                k = self.images[k]
                length += 1
            if length and length % 2 == 0:
                sign = -sign
        return sign


def _same_kind(a, b):
    if a is not b:
        raise MultiFormError(f"Kind mismatch: {a.value} vs {b.value}", "KIND_MISMATCH")


def _first_difference(a, b, kind, policy):
    """First multi-index where a and b differ, using one scale for the whole array."""
    if kind.is_exact:
        for index in np.ndindex(a.shape):
            if a[index] != b[index]:
                return index
        return None
    scale = max(linalg.max_abs(a, kind), linalg.max_abs(b, kind))
    bad = np.abs(a - b) > policy.threshold(scale)
    if not bad.any():
        return None
    return tuple(int(i) for i in np.argwhere(bad)[0])


def forms_close(f, g, policy=None):
    """None when f and g agree; otherwise the first differing multi-index."""
    _same_kind(f.kind, g.kind)
    if f.coeffs.shape != g.coeffs.shape:
        raise MultiFormError(f"Shape mismatch: {f.coeffs.shape} vs {g.coeffs.shape}", "DIMENSION_MISMATCH")
    return _first_difference(f.coeffs, g.coeffs, f.kind, policy or TolerancePolicy.default())


def zero_form(arity, dim, kind):
    return MultiForm.zeros(arity, dim, kind)


def eval_form(form, xs):
    """
    Evaluate F(x_1, ..., x_n) on coordinate vectors.

    Raises:
        MultiFormError: ARITY_MISMATCH or DIMENSION_MISMATCH
    """
    if len(xs) != form.arity:
        raise MultiFormError(f"Expected {form.arity} vectors, got {len(xs)}", "ARITY_MISMATCH")
    result = form.coeffs
    for slot, x in enumerate(xs):
        x = form.kind.array(x)
        if x.shape != (form.dim,):
            raise MultiFormError(f"Vector {slot} has shape {x.shape}, expected ({form.dim},)", "DIMENSION_MISMATCH")
        result = np.tensordot(x, result, axes=([0], [0])) if form.dim else np.zeros(result.shape[1:])
    value = np.asarray(result).item() if form.dim else 0
    return Scalar(form.kind, value)


def permute_slots(form, sigma):
    """F^sigma(u_1, ..., u_n) = F(u_sigma(1), ..., u_sigma(n))."""
    if sigma.arity != form.arity:
        raise MultiFormError(f"Permutation arity {sigma.arity} != form arity {form.arity}", "ARITY_MISMATCH")
    return MultiForm(form.kind, np.transpose(form.coeffs, axes=sigma.inverse().images))


def _contract(coeffs, slot, mat, kind):
    moved = np.tensordot(coeffs, mat, axes=([slot], [0])) if mat.shape[0] else \
        linalg.zeros(coeffs.shape[:slot] + coeffs.shape[slot + 1:] + (mat.shape[1],), kind)
    return kind.array(np.moveaxis(moved, -1, slot))


def contract_slot(form, slot, linear_map):
    """result(..., i, ...) = sum_j F(..., j, ...) * M[j, i], i.e. F with M applied to one slot."""
    _same_kind(form.kind, linear_map.kind)
    if not 0 <= slot < form.arity:
        raise MultiFormError(f"Slot {slot} out of range for arity {form.arity}", "ARITY_MISMATCH")
    if linear_map.entries.shape != (form.dim, form.dim):
        raise MultiFormError(f"Map shape {linear_map.entries.shape} does not match dim {form.dim}",
                             "DIMENSION_MISMATCH")
    return MultiForm(form.kind, _contract(form.coeffs, slot, linear_map.entries, form.kind))


def pull_back(form, mats):
    """Apply one (possibly rectangular) matrix per slot: F(M_1 x_1, ..., M_n x_n)."""
    coeffs = form.coeffs
    for slot, mat in enumerate(mats):
        if mat.shape[0] != form.dim:
            raise MultiFormError(f"Matrix with {mat.shape[0]} rows cannot act on dim {form.dim}",
                                 "DIMENSION_MISMATCH")
        coeffs = _contract(coeffs, slot, mat, form.kind)
    return MultiForm(form.kind, coeffs)


def change_basis(form, transition):
    """b_{i'..k'} = sum a_{i..k} c_{ii'} ... c_{kk'}; columns of C are the new basis."""
    _same_kind(form.kind, transition.kind)
    if transition.entries.shape != (form.dim, form.dim):
        raise MultiFormError(f"Transition shape {transition.entries.shape} does not match dim {form.dim}",
                             "DIMENSION_MISMATCH")
    return pull_back(form, [transition.entries] * form.arity)


def restrict(form, basis):
    """Coefficients of F restricted to the span of the columns of `basis`."""
    basis = form.kind.array(basis)
    return pull_back(form, [basis] * form.arity)


def direct_sum(first, second):
    _same_kind(first.kind, second.kind)
    if first.arity != second.arity:
        raise MultiFormError(f"Arity mismatch: {first.arity} vs {second.arity}", "ARITY_MISMATCH")
    m1, m2 = first.dim, second.dim
    coeffs = linalg.zeros((m1 + m2,) * first.arity, first.kind)
    coeffs[(slice(0, m1),) * first.arity] = first.coeffs
    coeffs[(slice(m1, m1 + m2),) * first.arity] = second.coeffs
    return MultiForm(first.kind, coeffs)


def slot_flattening(form, slot):
    """m x m^(n-1) matrix whose rows are indexed by the given slot."""
    moved = np.moveaxis(form.coeffs, slot, 0)
    return moved.reshape(form.dim, -1)


def radical(form, policy=None):
    """
    Basis (columns) of the vectors annihilating F in every slot.

    Intersection of the left kernels of all slot flattenings, computed as one
    nullspace of the stacked transposes.
    """
    policy = policy or TolerancePolicy.default()
    if form.dim == 0:
        return linalg.zeros((0, 0), form.kind)
    stacked = np.vstack([slot_flattening(form, slot).T for slot in range(form.arity)])
    return linalg.nullspace(form.kind.array(stacked), form.kind, policy)


def _normalize_signs(signs, arity):
    if isinstance(signs, dict):
        values = [signs[k] for k in sorted(signs)]
    elif isinstance(signs, int):
        values = [signs] * (arity - 1)
    else:
        values = list(signs)
    if len(values) != arity - 1 or any(v not in (1, -1) for v in values):
        raise MultiFormError(f"Expected {arity - 1} signs of +/-1 on adjacent transpositions, got {values}",
                             "INCONSISTENT_SIGN_MAP")
    if len(set(values)) > 1:
        raise MultiFormError(f"Signs {values} do not extend to a character of S_{arity}",
                             "INCONSISTENT_SIGN_MAP", signs=values)
    return values[0] if values else 1


def is_epsilon_symmetric(form, signs, policy=None):
    """
    Check F^sigma = eps(sigma) F for every transposition.

    Args:
        form (MultiForm): Form to test
        signs: Signs on the adjacent transpositions (k, k+1), as a sequence,
            a dict keyed by k, or a single int applied to all of them
        policy (TolerancePolicy, optional): Float comparison policy

    Returns:
        CheckResult: witness holds the failing transposition and multi-index

    Raises:
        MultiFormError: INCONSISTENT_SIGN_MAP
    """
    policy = policy or TolerancePolicy.default()
    sign = _normalize_signs(signs, form.arity)
    expected = form.scaled(sign)
    for i, j in itertools.combinations(range(form.arity), 2):
        tau = Permutation.transposition(form.arity, i, j)
        index = forms_close(permute_slots(form, tau), expected, policy)
        if index is not None:
            return CheckResult(False, {"transposition": (i, j), "index": index})
    return CheckResult(True)


def symmetric_system(form):
    """All forms F^sigma, sigma in S_n, in itertools.permutations order."""
    return [permute_slots(form, Permutation(images)) for images in itertools.permutations(range(form.arity))]


def check_equivalence(source, target, maps, policy=None):
    """Check F(u_1, ..., u_n) = G(phi_1 u_1, ..., phi_n u_n) for the identity assignment."""
    policy = policy or TolerancePolicy.default()
    _same_kind(source.kind, target.kind)
    if len(maps) != target.arity:
        raise MultiFormError(f"Expected {target.arity} maps, got {len(maps)}", "ARITY_MISMATCH")
    pulled = pull_back(target, [linear_map.entries for linear_map in maps])
    index = forms_close(source, pulled, policy)
    if index is None:
        return CheckResult(True)
    return CheckResult(False, {"index": index, "expected": source.kind.format(source.coeffs[index]),
                               "actual": source.kind.format(pulled.coeffs[index])})


def systems_equivalent(sources, targets, maps, policy=None):
    """Check every pair (F_k, G_k) of two systems is equivalent through the same maps."""
    if len(sources) != len(targets):
        raise MultiFormError("Systems have different sizes", "DIMENSION_MISMATCH")
    for position, (source, target) in enumerate(zip(sources, targets)):
        result = check_equivalence(source, target, maps, policy)
        if not result:
            return CheckResult(False, dict(result.witness, position=position))
    return CheckResult(True)


def first_mixed_nonzero(form, labels, policy=None):
    """
    First multi-index whose basis vectors come from different blocks (or touch
    a label of -1, the radical) and whose coefficient is not negligible.
    """
    policy = policy or TolerancePolicy.default()
    labels = np.asarray(labels)
    if form.dim == 0:
        return None
    grids = np.meshgrid(*([labels] * form.arity), indexing="ij")
    pure = np.ones(form.coeffs.shape, dtype=bool)
    for grid in grids:
        pure &= (grid == grids[0]) & (grid >= 0)
    scale = linalg.max_abs(form.coeffs, form.kind)
    for index in map(tuple, np.argwhere(~pure)):
        if not form.kind.is_negligible(form.coeffs[index], policy, scale):
            return tuple(int(i) for i in index)
    return None
