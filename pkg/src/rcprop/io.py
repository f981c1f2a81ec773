"""CSV/JSON/binary writers with embedded schema versions.

CSV files are UTF-8 with a leading ``# rcprop.<kind>/<version>`` line, then
a header row; floats use Python's shortest round-trip repr.  JSON summaries
are single objects with sorted keys and a ``schema`` member.  The binary
ensemble dump is a flat array of little-endian ``(int64 index, float64
value, int64 n_singular_hits)`` records with no header.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .gamma import ENSEMBLE_DTYPE, GammaEnsemble

SCHEMA_VERSION = 1


def schema(kind: str) -> str:
    return f"rcprop.{kind}/{SCHEMA_VERSION}"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, kind: str, header, rows) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {schema(kind)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Return ``(schema, header, rows)`` with cells as strings."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        rows = list(csv.reader(fh))
    return first.lstrip("# "), rows[0], rows[1:]


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def write_json(path, kind: str, payload: dict) -> Path:
    path = Path(path)
    body = {"schema": schema(kind), "version": __version__, **jsonable(payload)}
    path.write_text(json.dumps(body, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def write_ensemble(path, ensemble: GammaEnsemble, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "bin":
        ensemble.to_records().tofile(path)
        return path
    rows = zip(range(ensemble.M), ensemble.values, ensemble.hits)
    return write_csv(path, "ensemble", ("index", "value", "n_singular_hits"), rows)


def read_ensemble_bin(path) -> np.ndarray:
    return np.fromfile(path, dtype=ENSEMBLE_DTYPE)
