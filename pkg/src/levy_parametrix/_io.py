"""Deterministic CSV output with a provenance header line."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

VERSION = "0.1.0"


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fmt(v):
    if isinstance(v, (bool,)):
        return "true" if v else "false"
    if isinstance(v, float) or hasattr(v, "dtype"):
        v = float(v)
        return repr(v) if v == v else "nan"
    if isinstance(v, (list, tuple)):
        return " ".join(fmt(u) for u in v)
    return str(v)


def write_csv(path, columns, rows, chash="none"):
    """Write ``rows`` under a ``# config_hash=..., version=...`` line and a column header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={chash}, version={VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(meta_line, columns, rows_as_str)``."""
    with Path(path).open() as fh:
        meta = fh.readline().rstrip("\n")
        r = csv.reader(fh)
        cols = next(r)
        return meta, cols, list(r)
