"""
Command-line front end.

Every command reads forms and maps in the JSON tensor format and writes a
JSON result to --out or stdout. Failures print {"error", "message", "details"}
to stderr and exit with 2 (invalid witness), 3 (no root in the exact field),
4 (numerical instability) or 1 (anything else).
"""
import argparse
import json
import os
import sys

from multiform import linalg
from multiform.config import load_config
from multiform.decompose import (align_decompositions, count_nonzero_summands, radical_complement_congruence,
                                 split_radical, support_blocks)
from multiform.errors import MultiFormError
from multiform.gen import EigenPair, GenSpec, gen_decomposable, gen_witness
from multiform.logging_config import generate_operation_id, log_context, setup_logging
from multiform.scalar import ScalarKind, TolerancePolicy
from multiform.serialization import (alignment_to_json, certificate_to_json, complement_from_json,
                                     decomposition_from_json, decomposition_to_json, dump_json, form_from_json,
                                     form_to_json, load_json, maps_from_json, maps_to_json, matrix_to_json,
                                     parse_kind, spec_from_json, spec_to_json)
from multiform.symmetrize import (SignedBlock, SignedCongruence, Witness, check_witness, symmetrize_complex,
                                  symmetrize_real, verify_congruence)
from multiform.tensor import change_basis, eval_form, forms_close, restrict

log = setup_logging(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CODES = {
    "WITNESS_INVALID": 2,
    "NO_ROOT_IN_FIELD": 3,
    "NUMERICAL_INSTABILITY": 4,
}


def _kind_arg(args):
    return parse_kind(args.field) if getattr(args, "field", None) else None


def _load_form(path, kind=None):
    return form_from_json(load_json(path), kind)


def _load_witness(args):
    kind = _kind_arg(args)
    source = _load_form(args.form_f, kind)
    target = _load_form(args.form_g, kind)
    maps = maps_from_json(load_json(args.maps), source.kind, source.dim)
    return Witness(tuple(maps), source, target)


def _scale(*forms):
    return max([1.0] + [linalg.max_abs(form.coeffs, form.kind) for form in forms])


def cmd_symmetrize(args):
    policy = TolerancePolicy.default()
    witness = _load_witness(args)
    witness.require_invertible(policy)
    if witness.kind.is_complex or args.complex:
        psi = symmetrize_complex(witness, policy, verify_steps=args.verify, float_fallback=False, tol=args.tol)
        congruence = SignedCongruence(psi, (SignedBlock(linalg.identity(psi.rows, psi.kind), 1),))
    else:
        congruence = symmetrize_real(witness, policy, verify_steps=args.verify, float_fallback=False, tol=args.tol)
    residual = verify_congruence(witness.source, witness.target, congruence.psi, congruence.blocks, policy)
    if args.verify and residual > args.tol * _scale(witness.source, witness.target):
        raise MultiFormError(f"Certificate residual {residual:.3e} exceeds --tol", "NUMERICAL_INSTABILITY",
                             residual=residual)
    return certificate_to_json(congruence, residual)


def cmd_check_witness(args):
    witness = _load_witness(args)
    result = check_witness(witness, TolerancePolicy.default(), full_sweep=args.full_sweep)
    if not result:
        raise MultiFormError("Maps are not a symmetric-equivalence witness", "WITNESS_INVALID", **result.witness)
    return {"valid": True, "arity": witness.arity, "dim": witness.source.dim}


def cmd_decompose(args):
    policy = TolerancePolicy.default()
    form = _load_form(args.form, _kind_arg(args))
    decomposition = support_blocks(form, policy)
    if args.verify:
        decomposition.validate(policy)
    return {
        **decomposition_to_json(decomposition),
        "nonzero_summands": count_nonzero_summands(form, policy),
        "block_dims": decomposition.dims,
    }


def cmd_align(args):
    policy = TolerancePolicy.default()
    form = _load_form(args.form, _kind_arg(args))
    first = decomposition_from_json(load_json(args.first), form)
    second = decomposition_from_json(load_json(args.second), form)
    if args.verify:
        first.validate(policy)
        second.validate(policy)
    alignment = align_decompositions(form, first, second, policy)
    if args.verify:
        for p, (q, phi) in enumerate(zip(alignment.permutation, alignment.congruences)):
            target = change_basis(restrict(form, second.blocks[q]), phi)
            if forms_close(restrict(form, first.blocks[p]), target, policy) is not None:
                raise MultiFormError(f"Block congruence {p} does not verify", "NUMERICAL_INSTABILITY", block=p)
    return alignment_to_json(alignment, form.kind)


def cmd_radical(args):
    policy = TolerancePolicy.default()
    form = _load_form(args.form, _kind_arg(args))
    complement, kernel = split_radical(form, policy)
    result = {
        "dim": int(kernel.shape[1]),
        "basis": matrix_to_json(kernel.T, form.kind),
        "complement": matrix_to_json(complement.T, form.kind),
    }
    if args.complement_a or args.complement_b:
        if not (args.complement_a and args.complement_b):
            raise MultiFormError("--complement-a and --complement-b go together", "INVALID_SPEC")
        basis_a = complement_from_json(load_json(args.complement_a), form.kind, form.dim)
        basis_b = complement_from_json(load_json(args.complement_b), form.kind, form.dim)
        phi = radical_complement_congruence(form, basis_a, basis_b, policy)
        result["congruence"] = matrix_to_json(phi.entries, form.kind)
        if args.verify:
            target = change_basis(restrict(form, basis_b), phi)
            if forms_close(restrict(form, basis_a), target, policy) is not None:
                raise MultiFormError("Complement congruence does not verify", "NUMERICAL_INSTABILITY")
    return result


def cmd_eval(args):
    form = _load_form(args.form, _kind_arg(args))
    vectors = [[form.kind.parse(text) for text in vector.split(",")] for vector in args.vector]
    value = eval_form(form, vectors)
    return {"value": str(value), "field": form.kind.value}


def _parse_eigenvalues(text, kind):
    values = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        if ":" in item:
            a, b = item.split(":", 1)
            values.append(EigenPair(kind.parse(a), kind.parse(b)))
        else:
            values.append(kind.parse(item))
    return tuple(values)


def _spec_from_args(args):
    if args.spec:
        return spec_from_json(load_json(args.spec))
    if args.seed is None or not args.block_dims:
        raise MultiFormError("gen needs --spec or --seed with --block-dims", "INVALID_SPEC")
    kind = parse_kind(args.field or "Q")
    try:
        dims = tuple(int(d) for d in args.block_dims.split(","))
    except ValueError:
        raise MultiFormError(f"Invalid --block-dims: {args.block_dims!r}", "INVALID_SPEC")
    return GenSpec(
        seed=args.seed,
        arity=args.arity,
        block_dims=dims,
        eigenvalues=_parse_eigenvalues(args.eigenvalues or "", kind),
        kind=kind,
        conjugate=not args.no_conjugate,
        radical_dim=args.radical_dim,
    )


def cmd_gen(args):
    spec = _spec_from_args(args)
    directory = args.out
    if not directory:
        raise MultiFormError("gen needs --out DIRECTORY", "INVALID_SPEC")
    kind = spec.kind
    files = {"spec.json": spec_to_json(spec)}
    if args.kind == "witness":
        generated = gen_witness(spec)
        witness = generated.witness
        files["form_f.json"] = form_to_json(witness.source)
        files["form_g.json"] = form_to_json(witness.target)
        files["maps.json"] = maps_to_json(witness.maps)
        files["hidden.json"] = {
            "tau": matrix_to_json(generated.tau.entries, kind),
            "blocks": [matrix_to_json(block.T, kind) for block in generated.blocks],
            "exponents": list(generated.exponents),
            "expected_signs": list(generated.expected_signs),
        }
    else:
        instance = gen_decomposable(spec)
        files["form.json"] = form_to_json(instance.form)
        files["first.json"] = decomposition_to_json(instance.first)
        files["second.json"] = decomposition_to_json(instance.second)
        files["hidden.json"] = {"permutation": list(instance.permutation)}
    for name, data in files.items():
        dump_json(data, os.path.join(directory, name))
    return {"directory": directory, "files": sorted(files)}


COMMANDS = {
    "symmetrize": cmd_symmetrize,
    "check-witness": cmd_check_witness,
    "decompose": cmd_decompose,
    "align": cmd_align,
    "radical": cmd_radical,
    "eval": cmd_eval,
    "gen": cmd_gen,
}


def handle_command(name, args):
    """
    Run one command.

    Args:
        name (str): Command name, a key of COMMANDS
        args (argparse.Namespace): Parsed arguments

    Returns:
        dict: JSON-ready result

    Raises:
        MultiFormError: any library failure, unchanged
    """
    if name not in COMMANDS:
        raise MultiFormError(f"Unknown command: {name}", "INVALID_SPEC")
    with log_context(log, name, operation_id=generate_operation_id()):
        return COMMANDS[name](args)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 like every other failure; 2 is reserved for invalid witnesses."""

    def error(self, message):
        raise MultiFormError(message, "INVALID_SPEC", usage=self.format_usage().strip())


def _add_field(parser):
    parser.add_argument("--field", choices=[kind.value for kind in ScalarKind],
                        help="convert inputs to this field")


def build_parser():
    config = load_config()
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the JSON result (gen: the fixture directory) here")
    common.add_argument("--verify", action="store_true", help="re-check every certificate before exit")
    common.add_argument("--tol", type=float, default=config.residual_tol, help="certificate residual tolerance")
    parser = _Parser(prog="multiform", description="Multilinear form congruence toolkit")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text):
        return commands.add_parser(name, help=help_text, parents=[common])

    sub = command("symmetrize", "turn a symmetric-equivalence witness into a congruence")
    sub.add_argument("--form-f", required=True)
    sub.add_argument("--form-g", required=True)
    sub.add_argument("--maps", required=True)
    sub.add_argument("--complex", action="store_true", help="solve over the complexified field")
    _add_field(sub)

    sub = command("check-witness", "verify the witness property under every reordering")
    sub.add_argument("--form-f", required=True)
    sub.add_argument("--form-g", required=True)
    sub.add_argument("--maps", required=True)
    sub.add_argument("--full-sweep", action="store_true", help="check all n! reorderings for any arity")
    _add_field(sub)

    sub = command("decompose", "split a form along its coefficient support")
    sub.add_argument("--form", required=True)
    _add_field(sub)

    sub = command("align", "match the blocks of two decompositions")
    sub.add_argument("--form", required=True)
    sub.add_argument("--first", required=True)
    sub.add_argument("--second", required=True)
    _add_field(sub)

    sub = command("radical", "radical basis, complement and complement congruence")
    sub.add_argument("--form", required=True)
    sub.add_argument("--complement-a")
    sub.add_argument("--complement-b")
    _add_field(sub)

    sub = command("eval", "evaluate a form on vectors")
    sub.add_argument("--form", required=True)
    sub.add_argument("--vector", action="append", required=True, help="comma-separated scalars, once per slot")
    _add_field(sub)

    sub = command("gen", "write a generator fixture directory")
    sub.add_argument("--spec")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--arity", type=int, default=3)
    sub.add_argument("--block-dims")
    sub.add_argument("--eigenvalues", help="comma-separated; a:b for the pair a +/- ib")
    sub.add_argument("--kind", choices=["witness", "decomposable"], default="witness")
    sub.add_argument("--radical-dim", type=int, default=0)
    sub.add_argument("--no-conjugate", action="store_true")
    _add_field(sub)
    return parser


def _emit(data, path, stream):
    if path:
        dump_json(data, path)
    else:
        print(json.dumps(data, indent=2), file=stream)


def main(argv=None):
    """
    Returns:
        int: process exit code
    """
    try:
        args = build_parser().parse_args(argv)
    except MultiFormError as error:
        print(json.dumps(error.to_dict()), file=sys.stderr)
        return EXIT_FAILURE
    try:
        result = handle_command(args.command, args)
        if args.command == "gen":
            print(json.dumps(result), file=sys.stdout)
        else:
            _emit(result, args.out, sys.stdout)
        return EXIT_OK
    except MultiFormError as error:
        log.error("Command %s failed with %s: %s", args.command, error.code, error)
        print(json.dumps(error.to_dict(), default=str), file=sys.stderr)
        return EXIT_CODES.get(error.code, EXIT_FAILURE)
    except Exception as error:
        log.error("Command %s failed: %s", args.command, error, exc_info=True)
        print(json.dumps({"error": "INTERNAL_ERROR", "message": str(error), "details": {}}), file=sys.stderr)
        return EXIT_FAILURE
