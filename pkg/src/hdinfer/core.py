"""Regression data model, column scaling and seeded random streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import HDInferError, LengthMismatch, NonFinite, ZeroColumn

_UINT64 = 2**64

# relative tolerance on ||x_j||^2 = n for data flagged as standardized
NORM_RTOL = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RegressionData:
    """Design matrix ``X`` (n x p, rows are observations) and response ``y``.

    ``column_scales[j]`` is the factor the raw column j was multiplied by to
    obtain ``X[:, j]``, so ``X == X_raw @ diag(column_scales)``.  ``X`` is
    stored Fortran-ordered because every solver in the package walks columns.
    """

    X: np.ndarray
    y: np.ndarray
    column_scales: np.ndarray | None = None
    standardized: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, order="F", copy=True)
        y = np.array(self.y, dtype=np.float64, copy=True).reshape(-1)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        n, p = X.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise LengthMismatch(f"y has length {y.shape[0]}, X has {n} rows")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise NonFinite("X and y must be finite")
        if self.column_scales is None:
            scales = np.ones(p)
        else:
            scales = np.array(self.column_scales, dtype=np.float64).reshape(-1)
            if scales.shape[0] != p:
                raise LengthMismatch("column_scales must have length p")
        if self.standardized:
            sq = np.einsum("ij,ij->j", X, X)
            bad = np.flatnonzero(np.abs(sq - n) > NORM_RTOL * n)
            if bad.size:
                raise ValueError(f"column {bad[0]} violates ||x_j||^2 = n")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "column_scales", _readonly(scales))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_response(self, y: np.ndarray) -> "RegressionData":
        return RegressionData(self.X, y, self.column_scales, self.standardized)


def standardize(data: RegressionData) -> RegressionData:
    """Rescale every column to squared norm n. Columns are never centered."""
    X = data.X
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumn(int(zero[0]))
    scales = np.sqrt(data.n) / norms
    return RegressionData(
        X * scales, data.y, data.column_scales * scales, standardized=True
    )


def destandardize_coefficients(beta_std, scales) -> np.ndarray:
    """Map coefficients fitted on scaled columns back to the raw columns."""
    beta_std = np.asarray(beta_std, dtype=np.float64)
    scales = np.asarray(scales, dtype=np.float64)
    if beta_std.shape != scales.shape:
        raise LengthMismatch(
            f"coefficients {beta_std.shape} vs scales {scales.shape}"
        )
    return beta_std * scales


@dataclass(frozen=True)
class SeedSpec:
    """Address of an independent random stream.

    Streams are derived with :class:`numpy.random.SeedSequence` from
    ``(master_seed, stream_id, *path)`` and drive a counter-based Philox
    generator, so any stream can be regenerated without replaying others.
    ``child`` extends the path, e.g. replication -> bootstrap -> draw b.
    """

    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.master_seed, self.stream_id, *self.path):
            if not 0 <= int(v) < _UINT64:
                raise ValueError(f"seed component {v} is not an unsigned 64-bit int")

    def child(self, *keys: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id, self.path + tuple(keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.stream_id, *self.path)
        )
        return np.random.Generator(np.random.Philox(seq))


def gaussian_stream(seed: SeedSpec, count: int) -> np.ndarray:
    """``count`` standard-normal variates, a pure function of ``seed``."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return seed.generator().standard_normal(count)


@dataclass(frozen=True)
class ConfidenceInterval:
    j: int
    lower: float
    upper: float
    level: float
    method: str  # "BS-DB", "DB" or "DDB-plug-in"

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"empty interval ({self.lower}, {self.upper})")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def read_csv(
    path: str | Path,
    response: str | int,
    *,
    header: bool = True,
    columns: Sequence[str | int] | None = None,
) -> tuple[RegressionData, list[str]]:
    """Load a comma-separated UTF-8 file.

    ``response`` selects the y column by header name or 0-based index; every
    other column (or only ``columns``, if given) goes into X.  Returns the
    data together with the names of the X columns.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise HDInferError(f"{path}: no rows")
    if header:
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    else:
        names = [f"x{k}" for k in range(len(rows[0]))]

    def resolve(key: str | int) -> int:
        if isinstance(key, int) or (isinstance(key, str) and key.isdigit() and key not in names):
            k = int(key)
            if not 0 <= k < len(names):
                raise HDInferError(f"column index {k} out of range")
            return k
        if key not in names:
            raise HDInferError(f"no column named {key!r}")
        return names.index(key)

    iy = resolve(response)
    ix = [resolve(c) for c in columns] if columns is not None else [
        k for k in range(len(names)) if k != iy
    ]
    try:
        table = np.array([[float(r[k]) for k in range(len(names))] for r in rows])
    except (ValueError, IndexError) as exc:
        raise HDInferError(f"{path}: non-numeric or ragged row ({exc})") from None
    data = RegressionData(table[:, ix], table[:, iy])
    return data, [names[k] for k in ix]
