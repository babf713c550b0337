"""Regression dataset container and its CSV wire format.

The on-disk format is a UTF-8 CSV with a header row naming the columns
``x1, ..., xd, y`` in that order.  Values are written with shortest
round-trip ``repr`` so that save/load reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class DatasetError(Exception):
    """Malformed dataset file or inconsistent arrays."""


class EmptyFile(DatasetError):
    def __init__(self, path):
        super().__init__(f"{path}: empty dataset file")


class MissingColumn(DatasetError):
    def __init__(self, column, path=None):
        self.column = column
        where = f"{path}: " if path else ""
        super().__init__(f"{where}missing column {column!r}")


class NonNumericCell(DatasetError):
    def __init__(self, row, column, value, path=None):
        self.row = row
        self.column = column
        where = f"{path}: " if path else ""
        super().__init__(
            f"{where}non-numeric value {value!r} at line {row}, column {column!r}"
        )


@dataclass(frozen=True)
class Dataset:
    """Immutable design matrix ``X`` (n x d) and response ``Y`` (n,)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        Y = np.array(self.Y, dtype=float, copy=True)
        if X.ndim != 2:
            raise DatasetError("X must be a 2-d array")
        if Y.ndim != 1:
            raise DatasetError("Y must be a 1-d array")
        n, d = X.shape
        if n < 2:
            raise DatasetError("need at least 2 observations")
        if d < 1:
            raise DatasetError("need at least 1 covariate")
        if Y.shape[0] != n:
            raise DatasetError("X and Y row counts differ")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise DatasetError("X and Y must be finite")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _expected_header(ncols: int) -> list[str]:
    return [f"x{k}" for k in range(1, ncols)] + ["y"]


def load_dataset(path) -> Dataset:
    """Read a ``x1..xd,y`` CSV file into a :class:`Dataset`.

    Raises :class:`EmptyFile`, :class:`MissingColumn` or
    :class:`NonNumericCell` (with 1-based file line numbers) on
    malformed input.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise EmptyFile(path)
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise MissingColumn("y" if header != ["y"] else "x1", path)
    expected = _expected_header(len(header))
    for got, want in zip(header, expected):
        if got != want:
            raise MissingColumn(want, path)
    if len(rows) == 1:
        raise EmptyFile(path)
    d = len(header) - 1
    values = np.empty((len(rows) - 1, d + 1))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise MissingColumn(expected[min(len(row), d)], path)
        for c, cell in enumerate(row):
            try:
                values[r - 2, c] = float(cell)
            except ValueError:
                raise NonNumericCell(r, header[c], cell, path) from None
    return Dataset(X=values[:, :d], Y=values[:, d])


def save_dataset(data: Dataset, path) -> None:
    """Write ``data`` as CSV; a subsequent load is bit-exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(data.d + 1))
        for i in range(data.n):
            writer.writerow(
                [repr(float(v)) for v in data.X[i]] + [repr(float(data.Y[i]))]
            )
