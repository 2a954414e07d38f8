"""CSV ingestion for ETT-style and generic numeric time-series files."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import EmptyFile, ParseError
from .series import MultiSeries

TIMESTAMP_NAMES = {"date", "datetime", "timestamp", "time"}


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path: str | Path, delimiter: str = ",", timestamp: Optional[bool] = None) -> MultiSeries:
    """Read a numeric CSV into a MultiSeries.

    A header row is expected unless the first row is entirely numeric. The
    first column is treated as a timestamp and dropped when its header is
    ``date`` (or a similar name) or when its first data cell is not a
    number; pass ``timestamp`` to force either way. Errors report 1-based
    file row and column numbers.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter)) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path}: no rows")
    first = [c.strip() for c in rows[0][1]]
    has_header = not all(_is_number(c) for c in first)
    header = first if has_header else None
    data = rows[1:] if has_header else rows
    if not data:
        raise EmptyFile(f"{path}: header only, no data rows")
    if timestamp is None:
        timestamp = (header is not None and header[0].lower() in TIMESTAMP_NAMES) or not _is_number(data[0][1][0].strip())
    skip = 1 if timestamp else 0
    width = len(data[0][1])
    if width - skip < 1:
        raise EmptyFile(f"{path}: no value columns")
    values = np.empty((len(data), width - skip))
    for n, (line, cells) in enumerate(data):
        if len(cells) != width:
            raise ParseError(line, min(len(cells), width) + 1, "<missing>" if len(cells) < width else cells[width],
                             str(path))
        for j in range(skip, width):
            cell = cells[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(line, j + 1, cell, str(path)) from None
            if not np.isfinite(v):
                raise ParseError(line, j + 1, cell, str(path))
            values[n, j - skip] = v
    names = header[skip:] if header is not None else [f"ch{i}" for i in range(width - skip)]
    return MultiSeries(values, names)


def write_csv(series: MultiSeries, path: str | Path, timestamps: Optional[Sequence[str]] = None) -> Path:
    """Write a series with a header row; ``repr`` floats make the round trip exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head: List[str] = (["date"] if timestamps is not None else []) + list(series.channel_names)
        w.writerow(head)
        for i, row in enumerate(series.values):
            cells = [repr(float(v)) for v in row]
            w.writerow(([timestamps[i]] if timestamps is not None else []) + cells)
    return path
