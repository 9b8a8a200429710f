"""
Turn a symmetric-equivalence witness into a single congruence.

The driver equalizes the witness maps left to right. At step t the first t
maps agree on phi; tau = phi phi_{t+1}^-1 is G-selfadjoint, and a polynomial
rho in tau with rho^(t+1) = tau^-1 replaces phi_1..phi_{t+1} by rho phi.
Over the reals, negative real eigenvalue groups of tau are first absorbed by
a sign map, which either moves on to the next witness map or, at the last
step, ends up as the sign of an output block.
"""
import itertools
from dataclasses import dataclass

import numpy as np

from multiform import linalg
from multiform.config import load_config
from multiform.errors import MultiFormError
from multiform.logging_config import log_context, setup_logging
from multiform.matfun import (assemble, inverse_root_poly_complex, inverse_root_poly_real, poly_apply,
                              restricted_maps, spectral_split)
from multiform.scalar import ScalarKind, TolerancePolicy
from multiform.selfadjoint import is_selfadjoint
from multiform.tensor import (CheckResult, LinearMap, Permutation, change_basis, check_equivalence,
                              forms_close, is_epsilon_symmetric, pull_back)

log = setup_logging(__name__)

_EXACT_STOPS = ("NO_ROOT_IN_FIELD", "EIGENVALUE_NOT_FOUND")


def common_kind(*kinds):
    """Smallest kind holding values of every given kind."""
    is_complex = any(kind.is_complex for kind in kinds)
    if all(kind.is_exact for kind in kinds):
        return ScalarKind.QI if is_complex else ScalarKind.Q
    return ScalarKind.C64 if is_complex else ScalarKind.R64


@dataclass(frozen=True, eq=False)
class Witness:
    """Maps (phi_1, ..., phi_n) claimed to relate source F to target G under every reordering."""
    maps: tuple
    source: object
    target: object

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if self.source.coeffs.shape != self.target.coeffs.shape:
            raise MultiFormError("Source and target forms differ in shape", "DIMENSION_MISMATCH")
        if len(self.maps) != self.source.arity:
            raise MultiFormError(f"Expected {self.source.arity} maps, got {len(self.maps)}", "ARITY_MISMATCH")
        kinds = {self.source.kind, self.target.kind} | {linear_map.kind for linear_map in self.maps}
        if len(kinds) > 1:
            raise MultiFormError("Witness mixes scalar kinds", "KIND_MISMATCH",
                                 kinds=sorted(kind.value for kind in kinds))
        for position, linear_map in enumerate(self.maps):
            if linear_map.entries.shape != (self.source.dim, self.source.dim):
                raise MultiFormError(f"Map {position} has shape {linear_map.entries.shape}", "DIMENSION_MISMATCH",
                                     index=position)

    @property
    def kind(self):
        return self.source.kind

    @property
    def arity(self):
        return self.source.arity

    def as_kind(self, kind):
        return Witness(tuple(linear_map.as_kind(kind) for linear_map in self.maps),
                       self.source.as_kind(kind), self.target.as_kind(kind))

    def require_invertible(self, policy=None):
        """
        Raises:
            MultiFormError: SINGULAR_INPUT naming the first singular map
        """
        policy = policy or TolerancePolicy.default()
        for position, linear_map in enumerate(self.maps):
            if not linalg.is_invertible(linear_map.entries, self.kind, policy):
                raise MultiFormError(f"Map {position} is singular", "SINGULAR_INPUT", index=position)
        return self


@dataclass(frozen=True, eq=False)
class SignedBlock:
    basis: np.ndarray
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise MultiFormError(f"Block sign must be +1 or -1, got {self.sign}", "INVALID_SPEC")


@dataclass(frozen=True, eq=False)
class SignedCongruence:
    """F = (sum of sign * G restricted to each block) composed with psi."""
    psi: LinearMap
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def signs(self):
        return [block.sign for block in self.blocks]

    def signed_target(self, target):
        """G with each block's projected part multiplied by the block sign."""
        if all(block.sign == 1 for block in self.blocks):
            return target
        kind, m = target.kind, target.dim
        basis = linalg.hstack([kind.array(block.basis) for block in self.blocks], m, kind)
        inverse = linalg.inverse(basis, kind)
        total, offset = None, 0
        for block in self.blocks:
            width = block.basis.shape[1]
            projector = linalg.matmul(basis[:, offset:offset + width], inverse[offset:offset + width, :], kind)
            part = pull_back(target, [projector] * target.arity).scaled(block.sign)
            total = part if total is None else total + part
            offset += width
        return total


def check_witness(witness, policy=None, full_sweep=False):
    """
    Verify F(u_1, ..., u_n) = G(phi_{i_1} u_1, ..., phi_{i_n} u_n) on every basis tuple.

    Arity up to 4 checks all n! reorderings; above that only the identity and
    its transpositions unless full_sweep is set.

    Returns:
        CheckResult: witness holds the reordering, multi-index, expected and actual values
    """
    policy = policy or TolerancePolicy.default()
    n = witness.arity
    if n <= 4 or full_sweep:
        orders = itertools.permutations(range(n))
    else:
        orders = [tuple(range(n))] + [Permutation.transposition(n, i, j).images
                                      for i, j in itertools.combinations(range(n), 2)]
    for order in orders:
        pulled = pull_back(witness.target, [witness.maps[k].entries for k in order])
        index = forms_close(witness.source, pulled, policy)
        if index is not None:
            kind = witness.kind
            return CheckResult(False, {
                "reordering": tuple(order),
                "index": index,
                "expected": kind.format(witness.source.coeffs[index]),
                "actual": kind.format(pulled.coeffs[index]),
            })
    return CheckResult(True)


def verify_congruence(source, target, psi, blocks=None, policy=None):
    """
    Largest |F(tuple) - G_signed(psi tuple)| over all basis tuples, as a float.

    blocks is a sequence of SignedBlock; None means the plain congruence.
    """
    kind = common_kind(source.kind, target.kind, psi.kind)
    source, target, psi = source.as_kind(kind), target.as_kind(kind), psi.as_kind(kind)
    if blocks:
        target = SignedCongruence(psi, blocks).signed_target(target)
    difference = source - change_basis(target, psi)
    return linalg.max_abs(difference.coeffs, kind)


def _guard_condition(linear_map, config, name, step):
    if linear_map.kind.is_exact:
        return
    condition = linalg.condition_number(linear_map.entries, linear_map.kind)
    if condition > config.condition_limit:
        raise MultiFormError(f"{name} is ill-conditioned at step {step} (condition {condition:.3e})",
                             "NUMERICAL_INSTABILITY", step=step, condition=condition)


def _sign_map(split, signs):
    kind = split.kind
    return assemble(split, [LinearMap.identity(group.dim, kind).scaled(sign)
                            for group, sign in zip(split.groups, signs)])


def _signed_blocks(split, signs, m, kind):
    positive = [group.basis for group, sign in zip(split.groups, signs) if sign == 1]
    negative = [group.basis for group, sign in zip(split.groups, signs) if sign == -1]
    blocks = []
    if positive:
        blocks.append(SignedBlock(linalg.hstack(positive, m, kind), 1))
    if negative:
        blocks.append(SignedBlock(linalg.hstack(negative, m, kind), -1))
    return blocks


def _run(witness, mode, policy, verify_steps):
    """One pass of the induction in the witness's own kind; returns (psi, signed blocks)."""
    config = load_config()
    kind = witness.kind
    maps = list(witness.maps)
    n, m = witness.arity, witness.source.dim
    for position, linear_map in enumerate(maps):
        _guard_condition(linear_map, config, f"Map {position}", 0)
    blocks = [SignedBlock(linalg.identity(m, kind), 1)]

    for t in range(1, n):
        tau = maps[0] @ maps[t].inverse()
        _guard_condition(tau, config, "tau", t)
        check = is_selfadjoint(witness.target, tau, policy)
        if not check:
            raise MultiFormError(f"tau is not selfadjoint at step {t}", "SELFADJOINTNESS_VIOLATED",
                                 step=t, **check.witness)
        split = spectral_split(tau, mode=mode, policy=policy)

        if mode == "real":
            signs = [-1 if not group.is_pair and group.eigenvalue < 0 else 1 for group in split.groups]
            if -1 in signs:
                epsilon = _sign_map(split, signs)
                maps[t] = epsilon @ maps[t]
                if t + 1 < n:
                    maps[t + 1] = epsilon @ maps[t + 1]
                else:
                    blocks = _signed_blocks(split, signs, m, kind)
                tau = tau @ epsilon
                split = split.with_signs(signs)
                log.debug("Step %d absorbed signs %s", t, signs)

        roots = []
        for group, block in zip(split.groups, restricted_maps(split, tau)):
            if mode == "complex":
                poly = inverse_root_poly_complex(block, group.eigenvalue, t + 1, policy)
            else:
                poly = inverse_root_poly_real(block, group.eigenvalue, t + 1, pair=group.is_pair, policy=policy)
            roots.append(poly_apply(poly, block))
        rho = assemble(split, roots)
        phi = rho @ maps[0]
        for k in range(t + 1):
            maps[k] = phi
        log.debug("Step %d equalized %d maps over %d spectral groups", t, t + 1, len(split.groups))

        if verify_steps:
            target = SignedCongruence(phi, blocks).signed_target(witness.target)
            result = check_witness(Witness(tuple(maps), witness.source, target), policy)
            if not result:
                raise MultiFormError(f"Witness property lost after step {t}", "NUMERICAL_INSTABILITY",
                                     step=t, **result.witness)
    return maps[0], blocks


def _symmetrize(witness, mode, policy, verify_steps, float_fallback, tol):
    policy = policy or TolerancePolicy.default()
    result = check_witness(witness, policy)
    if not result:
        raise MultiFormError("Maps are not a symmetric-equivalence witness", "WITNESS_INVALID", **result.witness)
    witness.require_invertible(policy)
    try:
        psi, blocks = _run(witness, mode, policy, verify_steps)
    except MultiFormError as error:
        if not witness.kind.is_exact or error.code not in _EXACT_STOPS:
            raise
        if not float_fallback:
            raise MultiFormError(f"Exact run needs values outside {witness.kind.value}: {error}",
                                 "NO_ROOT_IN_FIELD", cause=error.code, hint="rerun with a float field",
                                 **error.details)
        floating = witness.kind.floating()
        log.warning("Exact run stopped with %s; restarting in %s", error.code, floating.value)
        witness = witness.as_kind(floating)
        psi, blocks = _run(witness, mode, policy, verify_steps)

    residual = verify_congruence(witness.source, witness.target, psi, blocks, policy)
    tol = load_config().residual_tol if tol is None else tol
    scale = max(1.0, linalg.max_abs(witness.source.coeffs, witness.kind),
                linalg.max_abs(witness.target.coeffs, witness.kind))
    if (witness.kind.is_exact and residual) or residual > tol * scale:
        raise MultiFormError(f"Congruence residual {residual:.3e} exceeds tolerance", "NUMERICAL_INSTABILITY",
                             residual=residual)
    log.info("Congruence found with residual %.3e", residual)
    return SignedCongruence(psi, blocks)


def symmetrize_complex(witness, policy=None, verify_steps=False, float_fallback=True, tol=None):
    """
    Single congruence psi with F(u_1, ..., u_n) = G(psi u_1, ..., psi u_n).

    Real inputs are complexified first. Exact runs that meet an irrational
    root restart in the floating kind unless float_fallback is off.

    Returns:
        LinearMap: psi

    Raises:
        MultiFormError: WITNESS_INVALID, SINGULAR_INPUT, SELFADJOINTNESS_VIOLATED,
            NO_ROOT_IN_FIELD, NUMERICAL_INSTABILITY
    """
    with log_context(log, "symmetrize_complex", arity=witness.arity, dim=witness.source.dim,
                     kind=witness.kind.value):
        witness = witness.as_kind(witness.kind.complexified())
        return _symmetrize(witness, "complex", policy, verify_steps, float_fallback, tol).psi


def symmetrize_real(witness, policy=None, verify_steps=False, float_fallback=True, tol=None):
    """
    psi and signed blocks with F = (sum sign_b G|block_b) composed with psi.

    Returns:
        SignedCongruence: At most one +1 block and one -1 block

    Raises:
        MultiFormError: KIND_MISMATCH for complex kinds, otherwise as symmetrize_complex
    """
    if witness.kind.is_complex:
        raise MultiFormError("Real symmetrization of a complex witness", "KIND_MISMATCH",
                             kind=witness.kind.value)
    with log_context(log, "symmetrize_real", arity=witness.arity, dim=witness.source.dim,
                     kind=witness.kind.value):
        return _symmetrize(witness, "real", policy, verify_steps, float_fallback, tol)


def congruence_from_equivalence(source, target, maps, signs, policy=None):
    """
    Congruence between two epsilon-symmetric forms related by a plain equivalence.

    With the same sign character on both forms, F(u) = G(phi_1 u_1, ..., phi_n u_n)
    already holds under every reordering, so the maps are a witness.

    Example:
        Maps found for the whole systems of permuted forms give one psi:

            if systems_equivalent(symmetric_system(source), symmetric_system(target), maps):
                psi = congruence_from_equivalence(source, target, maps, 1)
                assert verify_congruence(source, target, psi) == 0

    Raises:
        MultiFormError: WITNESS_INVALID when a symmetry or the equivalence fails
    """
    policy = policy or TolerancePolicy.default()
    for name, form in (("source", source), ("target", target)):
        result = is_epsilon_symmetric(form, signs, policy)
        if not result:
            raise MultiFormError(f"The {name} form is not epsilon-symmetric", "WITNESS_INVALID",
                                 form=name, **result.witness)
    result = check_equivalence(source, target, maps, policy)
    if not result:
        raise MultiFormError("Maps do not relate the forms", "WITNESS_INVALID", **result.witness)
    return symmetrize_complex(Witness(tuple(maps), source, target), policy)
