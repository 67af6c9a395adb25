"""Deterministic CSV / JSON writers and content hashes."""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence


def fmt(x) -> str:
    """Text form of one cell; floats round-trip exactly, NaN/None become empty."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, enum.Enum):
        return str(x.value)
    if isinstance(x, float) or hasattr(x, "dtype"):
        x = float(x)
        return "" if math.isnan(x) else repr(x)
    if isinstance(x, (date, datetime)):
        return x.isoformat()
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=fmt) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
