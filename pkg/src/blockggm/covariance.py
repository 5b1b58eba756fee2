"""Data ingestion, standardization and the empirical (MLE) covariance."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstantColumn, InputError

_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x p`` observation matrix with one label per column."""

    values: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise InputError(f"expected a 2-d matrix, got shape {values.shape}")
        if values.shape[1] < 1:
            raise InputError("need at least one variable")
        if not np.all(np.isfinite(values)):
            raise InputError("data contains missing or non-finite values")
        values.setflags(write=False)
        names = tuple(self.names) if self.names is not None and len(self.names) else tuple(
            f"V{j + 1}" for j in range(values.shape[1])
        )
        if len(names) != values.shape[1]:
            raise InputError(
                f"{len(names)} names given for {values.shape[1]} columns"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, columns) -> "DataMatrix":
        columns = list(columns)
        return DataMatrix(self.values[:, columns], tuple(self.names[j] for j in columns))


@dataclass(frozen=True)
class CovMatrix:
    """A symmetric positive semidefinite ``p x p`` matrix."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InputError(f"covariance must be square, got shape {values.shape}")
        if not np.allclose(values, values.T, rtol=0, atol=1e-12):
            raise InputError("covariance matrix is not symmetric")
        values = (values + values.T) / 2
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def block(self, indices) -> "CovMatrix":
        idx = np.asarray(list(indices), dtype=int)
        return CovMatrix(self.values[np.ix_(idx, idx)])


def standardize(x: DataMatrix) -> DataMatrix:
    """Center every column and scale it to unit MLE variance (divisor n).

    Raises
    ------
    ConstantColumn
        If a column has variance below 1e-12 (relative to its magnitude).
    """
    if x.n < 2:
        raise InputError("need at least two observations")
    values = x.values
    mean = values.mean(axis=0)
    centered = values - mean
    var = (centered ** 2).mean(axis=0)
    scale = np.maximum(1.0, np.abs(mean)) ** 2
    for j in np.flatnonzero(var <= _VAR_FLOOR * scale):
        raise ConstantColumn(int(j), x.names[j])
    out = centered / np.sqrt(var)
    # second pass removes the rounding left by the first
    out -= out.mean(axis=0)
    out /= np.sqrt((out ** 2).mean(axis=0))
    return DataMatrix(out, x.names)


def sample_covariance(x: DataMatrix, center: bool = True) -> CovMatrix:
    """MLE covariance ``(1/n) X^T X`` of the (centered) columns of ``x``."""
    values = x.values
    if center:
        values = values - values.mean(axis=0)
    s = values.T @ values / x.n
    return CovMatrix((s + s.T) / 2)


def read_csv(path) -> DataMatrix:
    """Read a header-plus-rows numeric CSV into a :class:`DataMatrix`."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{path} has a header but no observations")
    return DataMatrix(np.array(rows), tuple(h.strip() for h in header))


def write_csv(x: DataMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(x.names)
        for row in x.values:
            writer.writerow([repr(float(v)) for v in row])
