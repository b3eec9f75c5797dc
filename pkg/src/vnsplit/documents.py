"""JSON documents for matrices, algebras, splitting maps and channels.

A matrix is ``{"rows": r, "cols": c, "data": [[re, im], ...]}`` in row-major
order. Floats are written with Python's shortest round-trip representation,
so a save/load cycle reproduces every double exactly.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError
from .splitmap import ComprehensionWitness, SplittingMap, make_splitting_map
from .channels import Channel, SemiLocalisation, channel_from_kraus
from .vnalg import VnAlgebra, generate_algebra

__all__ = [
    "matrix_to_doc",
    "matrix_from_doc",
    "load_matrix",
    "save_matrix",
    "parse_json",
    "read_text",
    "encode",
    "algebra_to_doc",
    "algebra_from_doc",
    "splitting_map_to_doc",
    "splitting_map_from_doc",
    "channel_to_doc",
    "channel_from_doc",
    "witness_to_doc",
    "witness_from_doc",
    "semilocalisation_to_doc",
    "semilocalisation_from_doc",
    "document_kind",
]


def matrix_to_doc(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m[:, None]
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
    }


def _require(doc, key, kind):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError(f"{kind} document is missing {key!r}")
    return doc[key]


def _int(value, name) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ParseError(f"{name} must be a non-negative integer")
    return value


def matrix_from_doc(doc) -> np.ndarray:
    rows = _int(_require(doc, "rows", "matrix"), "rows")
    cols = _int(_require(doc, "cols", "matrix"), "cols")
    data = _require(doc, "data", "matrix")
    if not isinstance(data, list):
        raise ParseError("matrix data must be a list of [re, im] pairs")
    if len(data) != rows * cols:
        raise DimensionMismatch(f"matrix declares {rows}x{cols} but has {len(data)} entries")
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix entries must be numeric pairs: {exc}") from None
    if arr.size and arr.shape != (rows * cols, 2):
        raise ParseError("matrix entries must be [re, im] pairs")
    if arr.size == 0:
        return np.zeros((rows, cols), dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ParseError("matrix entries must be finite")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(rows, cols)


def parse_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def read_text(path) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    return Path(path).read_text()


def encode(doc) -> str:
    return json.dumps(doc, allow_nan=False)


def load_matrix(path) -> np.ndarray:
    return matrix_from_doc(parse_json(read_text(path)))


def save_matrix(m, path) -> None:
    text = encode(matrix_to_doc(m))
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


def algebra_to_doc(dim: int, generators) -> dict:
    return {"dim": int(dim), "generators": [matrix_to_doc(g) for g in generators]}


def algebra_from_doc(doc, tol=None) -> VnAlgebra:
    dim = _int(_require(doc, "dim", "algebra"), "dim")
    gens = [matrix_from_doc(g) for g in _require(doc, "generators", "algebra")]
    for g in gens:
        if g.shape != (dim, dim):
            raise DimensionMismatch(f"generator of shape {g.shape} on a {dim}-dimensional space")
    return generate_algebra(gens, dim, tol)


def splitting_map_to_doc(chi: SplittingMap) -> dict:
    return {"d_H": chi.d_H, "d_L": chi.d_L, "d_R": chi.d_R, "isometry": matrix_to_doc(chi.isometry)}


def splitting_map_from_doc(doc, tol=None) -> SplittingMap:
    d_h = _int(_require(doc, "d_H", "splitting map"), "d_H")
    d_l = _int(_require(doc, "d_L", "splitting map"), "d_L")
    d_r = _int(_require(doc, "d_R", "splitting map"), "d_R")
    v = matrix_from_doc(_require(doc, "isometry", "splitting map"))
    if v.shape != (d_l * d_r, d_h):
        raise DimensionMismatch(f"isometry has shape {v.shape}, expected {(d_l * d_r, d_h)}")
    return make_splitting_map(v, d_l, d_r, tol)


def channel_to_doc(e: Channel) -> dict:
    return {"d_in": e.d_in, "d_out": e.d_out, "kraus": [matrix_to_doc(k) for k in e.kraus]}


def channel_from_doc(doc, tol=None, validate=True) -> Channel:
    d_in = _int(_require(doc, "d_in", "channel"), "d_in")
    d_out = _int(_require(doc, "d_out", "channel"), "d_out")
    kraus = [matrix_from_doc(k) for k in _require(doc, "kraus", "channel")]
    if not kraus:
        raise ParseError("channel needs at least one Kraus operator")
    for k in kraus:
        if k.shape != (d_out, d_in):
            raise DimensionMismatch(f"Kraus operator of shape {k.shape}, expected {(d_out, d_in)}")
    if not validate:
        return Channel(np.stack(kraus), d_in, d_out)
    return channel_from_kraus(kraus, d_in, d_out, tol)


def witness_to_doc(w: ComprehensionWitness) -> dict:
    return {"d_M": w.d_M, "black": matrix_to_doc(w.black), "white": matrix_to_doc(w.white)}


def witness_from_doc(doc) -> ComprehensionWitness:
    return ComprehensionWitness(
        matrix_from_doc(_require(doc, "black", "witness")),
        matrix_from_doc(_require(doc, "white", "witness")),
        _int(_require(doc, "d_M", "witness"), "d_M"),
    )


def semilocalisation_to_doc(s: SemiLocalisation) -> dict:
    return {
        "zeta_B": splitting_map_to_doc(s.zeta_B),
        "E1_isometry": matrix_to_doc(s.E1_isometry),
        "T": matrix_to_doc(s.T),
        "d_U": s.d_U,
    }


def semilocalisation_from_doc(doc, tol=None) -> SemiLocalisation:
    return SemiLocalisation(
        splitting_map_from_doc(_require(doc, "zeta_B", "semi-localisation"), tol),
        matrix_from_doc(_require(doc, "E1_isometry", "semi-localisation")),
        matrix_from_doc(_require(doc, "T", "semi-localisation")),
        _int(_require(doc, "d_U", "semi-localisation"), "d_U"),
    )


_KIND_KEYS = [
    ("semilocalisation", {"zeta_B", "T"}),
    ("splitting_map", {"isometry", "d_L", "d_R"}),
    ("channel", {"kraus"}),
    ("algebra", {"generators"}),
    ("witness", {"black", "white"}),
    ("matrix", {"rows", "cols", "data"}),
]


def document_kind(doc) -> str | None:
    if not isinstance(doc, dict):
        return None
    for kind, keys in _KIND_KEYS:
        if keys <= doc.keys():
            return kind
    return None
