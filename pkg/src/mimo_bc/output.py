"""
CSV emission and the run manifest.

Numbers are written with 12 significant digits in positional notation and a
'.' decimal separator, so identical tables always produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from numbers import Integral, Real
from pathlib import Path

import numpy as np

__all__ = ["format_value", "emit_csv", "RunManifest", "config_digest"]


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, Integral):
        return str(int(x))
    if isinstance(x, Real):
        x = float(x)
        if not np.isfinite(x):
            return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
        return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="k")
    return str(x)


def emit_csv(table, destination) -> Path:
    """Write ``table`` as UTF-8 CSV with a header row.

    ``destination`` is a file path or a directory, in which case the file is
    ``<table.name>.csv``. I/O errors propagate unchanged.
    """
    if not table.rows:
        raise ValueError(f"table {table.name!r} has no rows")
    dest = Path(destination)
    if dest.is_dir():
        dest = dest / f"{table.name}.csv"
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([format_value(v) for v in row])
    return dest


def config_digest(config: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class RunManifest:
    command: str
    config_digest: str
    master_seed: int
    version: str
    row_counts: dict = field(default_factory=dict)
    wall_seconds: float = 0.0
    config: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def write(self, directory) -> Path:
        path = Path(directory) / f"manifest_{self.command.replace('-', '_')}.json"
        path.write_text(json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
