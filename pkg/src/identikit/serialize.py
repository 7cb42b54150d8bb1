"""Report serialization helpers: 17-significant-digit floats, CSV and JSON writers.

Numbers are printed with 17 significant digits so that re-parsing a CSV
recovers the exact binary double that also appears in the JSON summary.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Render a float with enough digits for exact binary round-trip."""
    return format(float(x), ".17g")


def to_jsonable(obj):
    """Recursively convert arrays / numpy scalars to plain Python containers."""
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(to_jsonable(payload), indent=2) + "\n")


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    """Write rows, formatting every float with :func:`fmt`."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [fmt(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
