"""JSON serialization of an assembled influence system.

The document is self-describing: arrays are stored flat (row-major) next to
their shape, and floats are written with round-trip precision, so a reloaded
system reproduces every derived quantity bit for bit.
"""

from __future__ import annotations

import datetime
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .exterior import SideDensity
from .influence import CollocationSet, InfluenceSystem
from .interior import SIDES, BoundaryTrace, Geometry, Side

SCHEMA = "v1"
CACHE_ENV = "INFLUXION_CACHE_DIR"


class CacheMismatchError(ValueError):
    """A cache file does not match the requested geometry or schema."""


def _array(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarray(obj) -> np.ndarray:
    a = np.array(obj["data"], dtype=float).reshape(obj["shape"])
    a.setflags(write=False)
    return a


def _sides(per_side) -> dict:
    return {side.name.lower(): np.asarray(per_side[side], float).tolist() for side in SIDES}


def _unsides(obj) -> dict:
    return {side: np.array(obj[side.name.lower()], dtype=float) for side in SIDES}


def system_to_dict(sys: InfluenceSystem) -> dict:
    g = sys.geom
    return {
        "schema": SCHEMA,
        "geometry": {"H": g.H, "K": g.K, "L": g.L, "allow_degenerate": g.allow_degenerate},
        "collocation": sys.collocation.mode,
        "quad_tol": sys.quad_tol,
        "dropped": sys.dropped,
        "correction": sys.correction,
        "basis": [
            {
                "side": gen.side.name.lower(),
                "k": gen.k,
                "trace": _sides(trace),
                "neumann": _sides(neumann),
            }
            for gen, trace, neumann in zip(sys.generators, sys.traces, sys.exterior_neumann)
        ],
        "matrix": _array(sys.matrix),
        "U": _array(sys.U),
        "singular_values": _array(sys.singular_values),
        "Vt": _array(sys.Vt),
        "provenance": {
            "built": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
            "version": __version__,
        },
    }


def system_from_dict(doc: dict) -> InfluenceSystem:
    if doc.get("schema") != SCHEMA:
        raise CacheMismatchError(f"unsupported cache schema {doc.get('schema')!r} (expected {SCHEMA!r})")
    g = doc["geometry"]
    geom = Geometry(float(g["H"]), int(g["K"]), int(g["L"]), bool(g.get("allow_degenerate", False)))
    generators, traces, neumann = [], [], []
    for entry in doc["basis"]:
        generators.append(SideDensity(Side[entry["side"].upper()], int(entry["k"]), geom))
        traces.append(BoundaryTrace.from_sides(_unsides(entry["trace"])))
        neumann.append(_unsides(entry["neumann"]))
    return InfluenceSystem(
        geom=geom,
        collocation=CollocationSet.build(geom, doc["collocation"]),
        matrix=_unarray(doc["matrix"]),
        U=_unarray(doc["U"]),
        singular_values=_unarray(doc["singular_values"]),
        Vt=_unarray(doc["Vt"]),
        dropped=int(doc["dropped"]),
        traces=tuple(traces),
        generators=tuple(generators),
        exterior_neumann=tuple(neumann),
        quad_tol=float(doc["quad_tol"]),
        correction=doc["correction"],
    )


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_system(sys: InfluenceSystem, path) -> None:
    atomic_write_text(path, json.dumps(system_to_dict(sys)))


def read_document(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def load_system(path) -> InfluenceSystem:
    return system_from_dict(read_document(path))


def matches(doc: dict, geom: Geometry, mode: str, tol: float) -> bool:
    """Whether a cache document was built for exactly this request."""
    try:
        g = doc["geometry"]
        return (
            doc.get("schema") == SCHEMA
            and float(g["H"]) == geom.H
            and int(g["K"]) == geom.K
            and int(g["L"]) == geom.L
            and doc["collocation"] == mode
            and float(doc["quad_tol"]) == float(tol)
        )
    except (KeyError, TypeError, ValueError):
        return False


def cache_dir() -> Path:
    """Directory named by ``INFLUXION_CACHE_DIR``, or the working directory."""
    return Path(os.environ.get(CACHE_ENV) or ".")


def default_cache_path(geom: Geometry, mode: str, tol: float) -> Path:
    return cache_dir() / f"basis_H{geom.H:g}_K{geom.K}_L{geom.L}_{mode}_tol{tol:g}.json"
