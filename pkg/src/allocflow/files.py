"""CSV readers and writers used by the command line."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import TextIO

import numpy as np

from .model import NonRectangular
from .stats import GroupedOutcomes


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Headerless CSV: one row per recipient, one column per treatment."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise NonRectangular(f"{path}: rows have differing numbers of columns")
    return np.array(rows, dtype=float).reshape(len(rows), len(rows[0]) if rows else 0)


def write_matrix_csv(matrix: np.ndarray, fh: TextIO, decimals: int = 6) -> None:
    fmt = f"%.{decimals}f"
    for row in np.asarray(matrix):
        fh.write(",".join(fmt % v for v in row) + "\n")


def read_baseline(path: str | Path) -> np.ndarray:
    """One treatment index per line."""
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                vals.append(int(s))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a treatment index: {s!r}") from None
    return np.array(vals, dtype=np.int64)


def write_baseline(assignment, fh: TextIO) -> None:
    for j in np.asarray(assignment).tolist():
        fh.write(f"{j}\n")


def read_grouped_csv(path: str | Path) -> GroupedOutcomes:
    """CSV with columns group,arm,outcome; a header row is skipped if present."""
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected group,arm,outcome")
            g, a, y = (c.strip() for c in row)
            try:
                value = float(y)
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: bad outcome {y!r}") from None
            records.append((g, a, value))
    return GroupedOutcomes(records)


def parse_capacities(capacity: int | None, capacities: str | None, n_treatments: int) -> list[int]:
    if capacities is not None:
        try:
            caps = [int(c) for c in capacities.split(",") if c.strip()]
        except ValueError:
            raise ValueError(f"bad capacity list {capacities!r}") from None
        return caps
    if capacity is None:
        raise ValueError("give --capacity or --capacities")
    return [capacity] * n_treatments
