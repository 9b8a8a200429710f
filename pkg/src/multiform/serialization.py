"""
JSON codecs. Every number travels as a string in the canonical scalar format
of its kind, so exact values round-trip without loss.
"""
import json
import os

import numpy as np

from multiform import linalg
from multiform.decompose import Decomposition
from multiform.errors import MultiFormError
from multiform.gen import GenSpec
from multiform.logging_config import setup_logging
from multiform.matfun import Polynomial
from multiform.scalar import ScalarKind
from multiform.symmetrize import SignedBlock, SignedCongruence
from multiform.tensor import LinearMap, MultiForm

log = setup_logging(__name__)


def _require(data, *keys):
    if not isinstance(data, dict):
        raise MultiFormError(f"Expected a JSON object, got {type(data).__name__}", "SCHEMA_ERROR")
    missing = [key for key in keys if key not in data]
    if missing:
        raise MultiFormError(f"Missing keys: {', '.join(missing)}", "SCHEMA_ERROR", missing=missing)


def parse_kind(name):
    try:
        return ScalarKind(name)
    except ValueError:
        raise MultiFormError(f"Unknown field: {name!r}", "SCHEMA_ERROR", field=name)


def form_to_json(form):
    """Nonzero entries in lexicographic index order."""
    entries = []
    for index in np.ndindex(form.coeffs.shape):
        value = form.coeffs[index]
        if value:
            entries.append({"idx": [int(i) for i in index], "val": form.kind.format(value)})
    return {"arity": form.arity, "dim": form.dim, "field": form.kind.value, "entries": entries}


def form_from_json(data, kind=None):
    _require(data, "arity", "dim", "field", "entries")
    stored = parse_kind(data["field"])
    arity, dim = data["arity"], data["dim"]
    if not isinstance(arity, int) or not isinstance(dim, int) or arity < 2 or dim < 0:
        raise MultiFormError(f"Invalid arity/dim: {arity}/{dim}", "SCHEMA_ERROR")
    entries = {}
    for entry in data["entries"]:
        _require(entry, "idx", "val")
        index = tuple(entry["idx"])
        if index in entries:
            raise MultiFormError(f"Duplicate index {list(index)}", "SCHEMA_ERROR", index=list(index))
        entries[index] = stored.parse(entry["val"])
    form = MultiForm.from_entries(arity, dim, stored, entries)
    return form.as_kind(kind) if kind is not None and kind is not stored else form


def matrix_to_json(entries, kind):
    return [[kind.format(value) for value in row] for row in entries]


def matrix_from_json(rows, kind, shape=None):
    if not isinstance(rows, list) or any(not isinstance(row, list) for row in rows):
        raise MultiFormError("Matrix must be a list of rows", "SCHEMA_ERROR")
    if len({len(row) for row in rows}) > 1:
        raise MultiFormError("Matrix rows have different lengths", "SCHEMA_ERROR")
    parsed = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
    for i, row in enumerate(rows):
        for j, text in enumerate(row):
            parsed[i, j] = kind.parse(text)
    result = kind.array(parsed)
    if shape is not None and result.shape != shape:
        raise MultiFormError(f"Expected a {shape} matrix, got {result.shape}", "DIMENSION_MISMATCH")
    return result


def maps_to_json(maps):
    return [matrix_to_json(linear_map.entries, linear_map.kind) for linear_map in maps]


def maps_from_json(data, kind, dim=None):
    if not isinstance(data, list):
        raise MultiFormError("Maps file must hold a list of matrices", "SCHEMA_ERROR")
    shape = None if dim is None else (dim, dim)
    return [LinearMap(kind, matrix_from_json(rows, kind, shape)) for rows in data]


def _columns_to_json(columns, kind):
    return [[kind.format(value) for value in column] for column in columns.T]


def _columns_from_json(vectors, kind, m):
    if not isinstance(vectors, list):
        raise MultiFormError("Expected a list of vectors", "SCHEMA_ERROR")
    if not vectors:
        return linalg.zeros((m, 0), kind)
    return matrix_from_json(vectors, kind).T.copy()


def decomposition_to_json(decomposition):
    kind = decomposition.kind
    return {
        "blocks": [_columns_to_json(block, kind) for block in decomposition.blocks],
        "radical": _columns_to_json(decomposition.radical, kind),
    }


def decomposition_from_json(data, form):
    _require(data, "blocks", "radical")
    kind, m = form.kind, form.dim
    blocks = tuple(_columns_from_json(vectors, kind, m) for vectors in data["blocks"])
    return Decomposition(blocks, _columns_from_json(data["radical"], kind, m), form)


def complement_from_json(data, kind, m):
    """Read a complement basis from a list of vectors or from a radical result object."""
    if isinstance(data, dict):
        _require(data, "complement")
        data = data["complement"]
    columns = _columns_from_json(data, kind, m)
    if columns.shape[0] != m:
        raise MultiFormError(f"Vectors must have length {m}", "DIMENSION_MISMATCH")
    return columns


def certificate_to_json(congruence, residual=None):
    kind = congruence.psi.kind
    return {
        "field": kind.value,
        "psi": matrix_to_json(congruence.psi.entries, kind),
        "signs": [{"basis": _columns_to_json(kind.array(block.basis), kind), "sign": block.sign}
                  for block in congruence.blocks],
        "residual": None if residual is None else repr(float(residual)),
    }


def certificate_from_json(data):
    _require(data, "field", "psi", "signs")
    kind = parse_kind(data["field"])
    psi = LinearMap(kind, matrix_from_json(data["psi"], kind))
    blocks = []
    for entry in data["signs"]:
        _require(entry, "basis", "sign")
        blocks.append(SignedBlock(_columns_from_json(entry["basis"], kind, psi.rows), int(entry["sign"])))
    return SignedCongruence(psi, blocks)


def alignment_to_json(alignment, kind):
    return {
        "permutation": list(alignment.permutation),
        "congruences": maps_to_json(alignment.congruences),
        "transition": matrix_to_json(alignment.transition, kind),
        "subspace_checks": list(alignment.subspace_checks),
    }


def polynomial_to_json(poly):
    return {
        "field": poly.kind.value,
        "center": poly.kind.format(poly.center),
        "coeffs": [poly.kind.format(c) for c in poly.coeffs],
    }


def polynomial_from_json(data):
    _require(data, "field", "coeffs")
    kind = parse_kind(data["field"])
    return Polynomial(kind, tuple(kind.parse(c) for c in data["coeffs"]), kind.parse(data.get("center", "0")))


def spec_to_json(spec):
    return spec.to_dict()


def spec_from_json(data):
    return GenSpec.from_dict(data)


def load_json(path):
    """
    Raises:
        MultiFormError: IO_ERROR when unreadable, SCHEMA_ERROR when not JSON
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as error:
        raise MultiFormError(f"Cannot read {path}: {error}", "IO_ERROR", path=str(path))
    except json.JSONDecodeError as error:
        raise MultiFormError(f"Invalid JSON in {path}: {error}", "SCHEMA_ERROR", path=str(path))


def dump_json(data, path):
    try:
        directory = os.path.dirname(os.fspath(path))
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(data, handle, indent=2)
            handle.write("\n")
    except OSError as error:
        raise MultiFormError(f"Cannot write {path}: {error}", "IO_ERROR", path=str(path))
    log.debug("Wrote %s", path)
