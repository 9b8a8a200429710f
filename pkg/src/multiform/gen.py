"""
Seeded instance generators for the test harnesses and the `gen` command.

Witnesses hide a block-scalar selfadjoint map tau behind random changes of
basis: with phi_k = tau^c_k phi every reordering of the maps relates
F = G(phi_1 ., ..., phi_n .) to G. Decomposable instances hide a direct sum
behind block permutations, within-block changes of basis and radical shears.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ortho_group, unitary_group

from multiform import linalg
from multiform.decompose import Decomposition, is_indecomposable
from multiform.errors import MultiFormError
from multiform.logging_config import log_context, setup_logging
from multiform.scalar import ScalarKind
from multiform.symmetrize import Witness, check_witness
from multiform.tensor import LinearMap, MultiForm, change_basis, direct_sum, pull_back, radical

log = setup_logging(__name__)

_MAX_DRAWS = 50
_EXPONENT_RANGE = 4
_AXIS_TOL = 1e-9


@dataclass(frozen=True)
class EigenPair:
    """Conjugate pair a +/- ib, realised on R^2 by [[a, b], [-b, a]]."""
    a: object
    b: object


@dataclass(frozen=True)
class GenSpec:
    seed: int
    arity: int
    block_dims: tuple
    eigenvalues: tuple = ()
    kind: ScalarKind = ScalarKind.Q
    conjugate: bool = True
    radical_dim: int = 0
    exponents: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "block_dims", tuple(int(d) for d in self.block_dims))
        object.__setattr__(self, "eigenvalues", tuple(self._convert_eigenvalue(e) for e in self.eigenvalues))
        if self.exponents is not None:
            object.__setattr__(self, "exponents", tuple(int(c) for c in self.exponents))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise MultiFormError(f"Seed must be a 64-bit unsigned integer, got {self.seed}", "INVALID_SPEC")
        if self.arity < 2:
            raise MultiFormError(f"Arity must be at least 2, got {self.arity}", "INVALID_SPEC")
        if not self.block_dims or any(d < 1 for d in self.block_dims):
            raise MultiFormError(f"Block dimensions must be positive, got {self.block_dims}", "INVALID_SPEC")
        if self.radical_dim < 0:
            raise MultiFormError("Radical dimension must be nonnegative", "INVALID_SPEC")
        if self.exponents is not None and len(self.exponents) != self.arity:
            raise MultiFormError(f"Expected {self.arity} exponents, got {len(self.exponents)}", "INVALID_SPEC")

    def _convert_eigenvalue(self, value):
        if isinstance(value, EigenPair):
            if self.kind.is_complex:
                raise MultiFormError("Conjugate-pair descriptors need a real kind", "INVALID_SPEC")
            a, b = self.kind.convert(value.a), self.kind.convert(value.b)
            if not b > 0:
                raise MultiFormError(f"Pair ({value.a}, {value.b}) needs b > 0", "INVALID_SPEC")
            return EigenPair(a, b)
        try:
            converted = self.kind.convert(value)
        except MultiFormError as error:
            raise MultiFormError(f"Eigenvalue {value!r} does not fit {self.kind.value}", "INVALID_SPEC",
                                 cause=error.code)
        if not converted:
            raise MultiFormError("Eigenvalues must be nonzero", "INVALID_SPEC")
        return converted

    def eigenvalue_for(self, position):
        """Eigenvalues are assigned to blocks in order, cycling through the menu."""
        return self.eigenvalues[position % len(self.eigenvalues)]

    def to_dict(self):
        def encode(value):
            if isinstance(value, EigenPair):
                return {"a": self.kind.format(value.a), "b": self.kind.format(value.b)}
            return self.kind.format(value)

        return {
            "seed": int(self.seed),
            "arity": self.arity,
            "block_dims": list(self.block_dims),
            "eigenvalues": [encode(value) for value in self.eigenvalues],
            "field": self.kind.value,
            "conjugate": self.conjugate,
            "radical_dim": self.radical_dim,
            "exponents": None if self.exponents is None else list(self.exponents),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            kind = ScalarKind(data.get("field", "Q"))
            eigenvalues = [EigenPair(kind.parse(e["a"]), kind.parse(e["b"])) if isinstance(e, dict)
                           else kind.parse(e) for e in data.get("eigenvalues", [])]
            return cls(
                seed=int(data["seed"]),
                arity=int(data["arity"]),
                block_dims=tuple(data["block_dims"]),
                eigenvalues=tuple(eigenvalues),
                kind=kind,
                conjugate=bool(data.get("conjugate", True)),
                radical_dim=int(data.get("radical_dim", 0)),
                exponents=data.get("exponents"),
            )
        except (KeyError, TypeError, ValueError) as error:
            raise MultiFormError(f"Malformed generator spec: {error}", "SCHEMA_ERROR")


@dataclass(frozen=True, eq=False)
class GeneratedWitness:
    witness: Witness
    tau: LinearMap
    blocks: tuple
    eigenvalues: tuple
    exponents: tuple
    expected_signs: tuple
    spec: GenSpec


@dataclass(frozen=True, eq=False)
class DecomposableInstance:
    form: MultiForm
    first: Decomposition
    second: Decomposition
    permutation: tuple
    spec: GenSpec


@dataclass(frozen=True, eq=False)
class SelfadjointPair:
    form: MultiForm
    tau: LinearMap
    blocks: tuple
    eigenvalues: tuple = field(default=())


def _streams(seed, count):
    return [np.random.default_rng(child) for child in np.random.SeedSequence(int(seed)).spawn(count)]


def _random_entries(rng, shape, kind):
    """Nonzero small integers for exact kinds, standard normals for float kinds."""
    if kind.is_exact:
        values = rng.integers(1, 4, size=shape) * rng.choice([-1, 1], size=shape)
        if kind.is_complex:
            values = values + 1j * rng.integers(-3, 4, size=shape)
            return kind.array(values.astype(complex))
        return kind.array(values.astype(object))
    values = rng.standard_normal(shape)
    if kind.is_complex:
        values = values + 1j * rng.standard_normal(shape)
    return kind.array(values)


def random_invertible(rng, m, kind):
    """
    Exact kinds: unit lower times unit upper triangular integer matrix (determinant 1).
    Float kinds: Haar-random orthogonal or unitary matrix.
    """
    if kind.is_exact:
        lower = np.tril(rng.integers(-2, 3, size=(m, m)), -1) + np.eye(m, dtype=int)
        upper = np.triu(rng.integers(-2, 3, size=(m, m)), 1) + np.eye(m, dtype=int)
        return kind.array((lower @ upper).astype(object))
    if m == 1:
        if kind.is_complex:
            return kind.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]])
        return kind.array([[rng.choice([-1.0, 1.0])]])
    group = unitary_group if kind.is_complex else ortho_group
    return kind.array(group.rvs(m, random_state=rng))


def _pair_form(rng, arity, dim, kind):
    """
    Real form Re H(w_1, ..., w_n) with w = x - iy on each coordinate pair;
    multiplication by a + ib on w is the rotation-scaling block on (x, y).
    """
    wide = kind.complexified()
    half = dim // 2
    entries = _random_entries(rng, (half,) * arity, wide)
    unit = {0: wide.one, 1: wide.convert(-1j)}
    coeffs = linalg.zeros((dim,) * arity, kind)
    for index in np.ndindex(coeffs.shape):
        value = entries[tuple(i // 2 for i in index)]
        for i in index:
            value = wide.convert(value * unit[i % 2])
        coeffs[index] = wide.real_part(value)
    return MultiForm(kind, coeffs)


def _block_map(eigenvalue, dim, kind):
    if isinstance(eigenvalue, EigenPair):
        rotation = kind.array([[eigenvalue.a, eigenvalue.b], [-eigenvalue.b, eigenvalue.a]])
        return linalg.block_diagonal([rotation] * (dim // 2), kind)
    return kind.array(linalg.identity(dim, kind) * eigenvalue)


def _nonzero_block(rng, arity, dim, kind, pair):
    for _ in range(_MAX_DRAWS):
        block = _pair_form(rng, arity, dim, kind) if pair else MultiForm(kind, _random_entries(rng, (dim,) * arity,
                                                                                               kind))
        if not block.is_zero():
            return block
    raise MultiFormError("Could not draw a nonzero block", "SINGULAR_DRAW")


def _pair_sign(pair, exponents, kind):
    """
    Sign the real driver gives a rotation-pair block.

    Every witness map multiplies the block by a complex scalar z_k, starting
    from lambda^c_k. Step t sees tau = z_0 / z_t; on the negative real axis
    it flips z_t and z_(t+1), or the block sign at the last step, and then
    sets z_0..z_t to z_0 times the principal root tau^(-1/(t+1)).
    """
    value = kind.complexified().to_complex(kind.make_complex(pair.a, pair.b))
    scalars = [value ** c for c in exponents]
    n, sign = len(scalars), 1
    for t in range(1, n):
        tau = scalars[0] / scalars[t]
        if tau.real < 0 and abs(tau.imag) <= _AXIS_TOL * abs(tau):
            scalars[t] = -scalars[t]
            if t + 1 < n:
                scalars[t + 1] = -scalars[t + 1]
            else:
                sign = -1
            tau = -tau
        phi = scalars[0] * tau ** (-1.0 / (t + 1))
        scalars[: t + 1] = [phi] * (t + 1)
    return sign


def _block_sign(eigenvalue, exponents, kind):
    """Sign of the output block: sign(prod lambda^c_k) * sign(lambda^c_1)^n for real eigenvalues."""
    if isinstance(eigenvalue, EigenPair):
        return _pair_sign(eigenvalue, exponents, kind)
    if eigenvalue > 0:
        return 1
    odd = (sum(exponents) + len(exponents) * exponents[0]) % 2
    return -1 if odd else 1


def _draw_exponents(rng, spec, values):
    if spec.exponents is not None:
        return spec.exponents
    negative = not spec.kind.is_complex and any(
        not isinstance(value, EigenPair) and value < 0 for value in values)
    for _ in range(_MAX_DRAWS * 10):
        exponents = tuple(int(c) for c in rng.integers(0, _EXPONENT_RANGE, size=spec.arity))
        if not negative or (sum(exponents) + spec.arity * exponents[0]) % 2:
            return exponents
    raise MultiFormError("Could not draw exponents with the required parity", "SINGULAR_DRAW")


def _check_pairs(spec, values):
    for dim, value in zip(spec.block_dims, values):
        if isinstance(value, EigenPair) and dim % 2:
            raise MultiFormError(f"Conjugate-pair block needs an even dimension, got {dim}", "INVALID_SPEC")


def _hidden_structure(spec, rng):
    kind = spec.kind
    if not spec.eigenvalues:
        raise MultiFormError("Generator spec needs at least one eigenvalue", "INVALID_SPEC")
    values = [spec.eigenvalue_for(p) for p in range(len(spec.block_dims))]
    _check_pairs(spec, values)
    forms = [_nonzero_block(rng, spec.arity, d, kind, isinstance(v, EigenPair))
             for d, v in zip(spec.block_dims, values)]
    target = forms[0]
    for form in forms[1:]:
        target = direct_sum(target, form)
    tau = linalg.block_diagonal([_block_map(v, d, kind) for d, v in zip(spec.block_dims, values)], kind)
    m = sum(spec.block_dims)
    offsets = np.concatenate([[0], np.cumsum(spec.block_dims)]).astype(int)
    unit = linalg.identity(m, kind)
    blocks = [unit[:, offsets[p]:offsets[p + 1]] for p in range(len(spec.block_dims))]
    return target, LinearMap(kind, tau), blocks, values


def _conjugation(spec, rng, m):
    if not spec.conjugate:
        return LinearMap.identity(m, spec.kind)
    return LinearMap(spec.kind, random_invertible(rng, m, spec.kind))


def gen_witness(spec):
    """
    Witness with hidden spectral structure.

    Returns:
        GeneratedWitness: the witness plus tau, block bases, exponents and the
            expected output sign of every block, all in the conjugated coordinates

    Raises:
        MultiFormError: INVALID_SPEC, SINGULAR_DRAW
    """
    with log_context(log, "gen_witness", seed=spec.seed, dims=spec.block_dims, kind=spec.kind.value):
        kind = spec.kind
        form_rng, map_rng, exponent_rng, conjugate_rng = _streams(spec.seed, 4)
        target, tau, blocks, values = _hidden_structure(spec, form_rng)
        m = target.dim
        exponents = _draw_exponents(exponent_rng, spec, values)
        phi = LinearMap(kind, random_invertible(map_rng, m, kind))
        maps = [LinearMap(kind, linalg.matrix_power(tau.entries, c, kind)) @ phi for c in exponents]
        source = pull_back(target, [linear_map.entries for linear_map in maps])

        outer = _conjugation(spec, conjugate_rng, m)
        inner = _conjugation(spec, conjugate_rng, m)
        back = outer.inverse()
        target = change_basis(target, outer)
        source = change_basis(source, inner)
        maps = [back @ linear_map @ inner for linear_map in maps]
        tau = back @ tau @ outer
        blocks = [linalg.matmul(back.entries, block, kind) for block in blocks]

        witness = Witness(tuple(maps), source, target)
        result = check_witness(witness)
        if not result:
            raise MultiFormError("Generated witness failed its own check", "SINGULAR_DRAW", **result.witness)
        signs = tuple(1 if kind.is_complex else _block_sign(v, exponents, kind) for v in values)
        return GeneratedWitness(witness, tau, tuple(blocks), tuple(values), tuple(exponents), signs, spec)


def gen_selfadjoint_pair(spec):
    """(G, tau, hidden blocks) with tau block-scalar on G's summands, optionally conjugated."""
    kind = spec.kind
    form_rng, conjugate_rng = _streams(spec.seed, 2)
    target, tau, blocks, values = _hidden_structure(spec, form_rng)
    outer = _conjugation(spec, conjugate_rng, target.dim)
    back = outer.inverse()
    return SelfadjointPair(
        change_basis(target, outer),
        back @ tau @ outer,
        tuple(linalg.matmul(back.entries, block, kind) for block in blocks),
        tuple(values),
    )


def gen_single_group(seed, dim, eigenvalue, kind, pair=False):
    """
    Map with a single spectral group: lambda I (or rotation-scaling blocks)
    plus a random strictly block-upper-triangular part, conjugated.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    if pair:
        if dim % 2:
            raise MultiFormError("Conjugate-pair group needs an even dimension", "INVALID_SPEC")
        eigenvalue = EigenPair(kind.convert(eigenvalue.a), kind.convert(eigenvalue.b))
        size = 2
    else:
        eigenvalue = kind.convert(eigenvalue)
        size = 1
    core = kind.array(_block_map(eigenvalue, dim, kind))
    upper = _random_entries(rng, (dim, dim), kind)
    for i in range(dim):
        for j in range(dim):
            if j // size <= i // size:
                upper[i, j] = kind.zero
    core = kind.array(core + upper)
    change = random_invertible(rng, dim, kind)
    return LinearMap(kind, linalg.matmul(linalg.matmul(change, core, kind), linalg.inverse(change, kind), kind))


def _indecomposable_block(rng, arity, dim, kind):
    for _ in range(_MAX_DRAWS):
        block = MultiForm(kind, _random_entries(rng, (dim,) * arity, kind))
        if radical(block).shape[1]:
            continue
        if kind.is_exact and dim <= 2 and not is_indecomposable(block):
            continue
        return block
    raise MultiFormError(f"Could not draw an indecomposable block of dimension {dim}", "SINGULAR_DRAW")


def gen_decomposable(spec):
    """
    F = F_1 + ... + F_s + 0_k with two decompositions.

    The first is the construction basis; the second permutes the blocks,
    changes basis inside each block, shears block vectors by radical vectors
    and mixes the radical. permutation[p] is the position of block p in the second.
    """
    with log_context(log, "gen_decomposable", seed=spec.seed, dims=spec.block_dims, kind=spec.kind.value):
        kind = spec.kind
        form_rng, shuffle_rng, conjugate_rng = _streams(spec.seed, 3)
        blocks = [_indecomposable_block(form_rng, spec.arity, d, kind) for d in spec.block_dims]
        form = blocks[0]
        for block in blocks[1:]:
            form = direct_sum(form, block)
        k = spec.radical_dim
        if k:
            form = direct_sum(form, MultiForm.zeros(spec.arity, k, kind))
        m = form.dim
        offsets = np.concatenate([[0], np.cumsum(spec.block_dims)]).astype(int)
        unit = linalg.identity(m, kind)
        bases = [unit[:, offsets[p]:offsets[p + 1]] for p in range(len(blocks))]
        kernel = unit[:, offsets[-1]:]

        order = [int(p) for p in shuffle_rng.permutation(len(blocks))]
        moved = []
        for p in order:
            d = spec.block_dims[p]
            inside = linalg.matmul(bases[p], random_invertible(shuffle_rng, d, kind), kind)
            shear = linalg.matmul(kernel, _random_entries(shuffle_rng, (k, d), kind), kind) if k else 0
            moved.append(kind.array(inside + shear))
        mixed = linalg.matmul(kernel, random_invertible(shuffle_rng, k, kind), kind) if k else kernel

        outer = _conjugation(spec, conjugate_rng, m)
        back = outer.inverse().entries
        form = change_basis(form, outer)

        def carry(columns):
            return linalg.matmul(back, columns, kind)

        first = Decomposition(tuple(carry(b) for b in bases), carry(kernel), form)
        second = Decomposition(tuple(carry(b) for b in moved), carry(mixed), form)
        try:
            first.validate()
            second.validate()
        except MultiFormError as error:
            raise MultiFormError(f"Generated decomposition is invalid: {error}", "SINGULAR_DRAW", **error.details)
        permutation = tuple(int(q) for q in np.argsort(order))
        return DecomposableInstance(form, first, second, permutation, spec)


def gen_rotated_bilinear():
    """Identity bilinear form on Q^2 with the standard and a rotated orthonormal splitting."""
    kind = ScalarKind.Q
    form = MultiForm(kind, linalg.identity(2, kind))
    c, s = kind.convert("3/5"), kind.convert("4/5")
    first = Decomposition((kind.array([[1], [0]]), kind.array([[0], [1]])), linalg.zeros((2, 0), kind), form)
    second = Decomposition((kind.array([[c], [s]]), kind.array([[-s], [c]])), linalg.zeros((2, 0), kind), form)
    return form, first, second


def exact_menu(arity):
    """Eigenvalues whose every intermediate root stays rational: 1, 2^n!, 3^n!, -2^n!."""
    power = math.factorial(arity)
    return (1, 2 ** power, 3 ** power, -(2 ** power))
