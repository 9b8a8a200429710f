import itertools

from multiform import linalg
from multiform.decompose import Decomposition
from multiform.errors import MultiFormError
from multiform.logging_config import setup_logging
from multiform.matfun import poly_apply
from multiform.scalar import TolerancePolicy
from multiform.tensor import CheckResult, LinearMap, change_basis, contract_slot, first_mixed_nonzero, forms_close

log = setup_logging(__name__)


def is_selfadjoint(form, tau, policy=None, pairwise=False):
    """
    Check that tau can be moved between any two slots of the form.

    Args:
        form (MultiForm): G
        tau (LinearMap): Square map on G's space
        policy (TolerancePolicy, optional): Float comparison policy
        pairwise (bool): Compare every slot pair instead of slot 0 against the rest

    Returns:
        CheckResult: On failure the witness holds the slot pair, multi-index and both values
    """
    policy = policy or TolerancePolicy.default()
    if tau.entries.shape != (form.dim, form.dim):
        raise MultiFormError(f"Map shape {tau.entries.shape} does not match dim {form.dim}", "DIMENSION_MISMATCH")
    if tau.kind is not form.kind:
        kind = form.kind if form.kind.is_complex else tau.kind
        form, tau = form.as_kind(kind), tau.as_kind(kind)
    moved = [contract_slot(form, slot, tau) for slot in range(form.arity)]
    if pairwise:
        pairs = itertools.combinations(range(form.arity), 2)
    else:
        pairs = ((0, j) for j in range(1, form.arity))
    for i, j in pairs:
        index = forms_close(moved[i], moved[j], policy)
        if index is not None:
            return CheckResult(False, {
                "slots": (i, j),
                "index": index,
                "left": form.kind.format(moved[i].coeffs[index]),
                "right": form.kind.format(moved[j].coeffs[index]),
            })
    return CheckResult(True)


def polynomial_closure(form, tau, poly, policy=None):
    """f(tau) is G-selfadjoint whenever tau is."""
    return bool(is_selfadjoint(form, poly_apply(poly, tau), policy))


def split_along_spectrum(form, split, policy=None):
    """
    Confirm that G splits along the spectral subspaces of a G-selfadjoint map.

    Every coefficient of G in the split-adapted basis that mixes two groups
    must vanish; the groups are then returned as a Decomposition.

    Raises:
        MultiFormError: MIXED_BLOCK_NONZERO with the offending multi-index
    """
    policy = policy or TolerancePolicy.default()
    if split.dim != form.dim:
        raise MultiFormError(f"Split spans {split.dim} dimensions, form has {form.dim}", "DIMENSION_MISMATCH")
    form = form.as_kind(split.kind)
    adapted = change_basis(form, LinearMap(split.kind, split.basis_matrix()))
    index = first_mixed_nonzero(adapted, split.labels(), policy)
    if index is not None:
        raise MultiFormError(
            f"Mixed-block coefficient at {index} does not vanish",
            "MIXED_BLOCK_NONZERO",
            index=index,
            value=split.kind.format(adapted.coeffs[index]),
        )
    log.debug("Form splits along %d spectral groups", len(split.groups))
    return Decomposition(
        tuple(group.basis for group in split.groups),
        linalg.zeros((form.dim, 0), split.kind),
        form,
    )
