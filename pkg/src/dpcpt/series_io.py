"""Reading and writing count series as CSV.

Series files have a header row. Columns written by the package are ``x``,
``lambda`` and ``p_t`` (simulation) or ``x``, ``x_o`` and ``p_t``
(contamination). When reading, the contaminated column ``x_o`` is preferred
over ``x`` if both are present.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from dpcpt.exceptions import DataError
from dpcpt.ingarch import as_counts


def write_columns(path: Path | str, columns: dict[str, np.ndarray]) -> None:
    """Write equal-length columns to ``path`` in the given order."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    if len({a.shape[0] for a in arrays}) > 1:
        raise ValueError("columns must have equal length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow([_cell(v) for v in row])


def _cell(value) -> str:
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return repr(float(value))


def read_columns(path: Path | str) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        out: dict[str, list[str]] = {name.strip(): [] for name in reader.fieldnames}
        for row in reader:
            for key, value in row.items():
                out[key.strip()].append(value)
    return out


def read_series(path: Path | str, column: str | None = None) -> np.ndarray:
    """Load a count series, picking ``x_o`` if present and ``x`` otherwise.

    Raises
    ------
    DataError
        If no usable column exists or values are not nonnegative integers.
    """
    cols = read_columns(path)
    if column is None:
        column = "x_o" if "x_o" in cols else "x" if "x" in cols else None
        if column is None and len(cols) == 1:
            column = next(iter(cols))
    if column is None or column not in cols:
        raise DataError(f"{path}: no 'x_o' or 'x' column")
    try:
        values = np.array([float(v) for v in cols[column]])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value in column {column!r}") from exc
    return as_counts(values)
