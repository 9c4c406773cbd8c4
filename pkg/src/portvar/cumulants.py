"""Per-asset cumulant estimation from return series.

Raw sample moments are converted to cumulants with the moment/cumulant
recursion. Zero entries are flagged on the resulting matrix, never perturbed:
the critical-point count only holds when every cumulant is non-zero.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class IngestionError(ValueError):
    """Raised for malformed, short or non-finite return data."""


@dataclass(frozen=True)
class ReturnSeries:
    asset_id: str
    samples: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))


@dataclass(frozen=True)
class CumulantMatrix:
    """Real ``n x d`` matrix with ``entries[i][j-1] = kappa_j(X_i)``."""

    entries: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"cumulant matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"cumulant matrix must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cumulant matrix has non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        labels = tuple(self.labels) or tuple(f"asset{i + 1}" for i in range(arr.shape[0]))
        if len(labels) != arr.shape[0]:
            raise ValueError("one label per asset row is required")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def d(self) -> int:
        return self.entries.shape[1]

    def column(self, j: int) -> np.ndarray:
        """Cumulants of order ``j`` (1-based) across assets."""
        return self.entries[:, j - 1]

    def zero_entries(self) -> list[tuple[int, int]]:
        """1-based ``(i, j)`` positions of exactly-zero entries."""
        rows, cols = np.nonzero(self.entries == 0.0)
        return [(int(i) + 1, int(j) + 1) for i, j in zip(rows, cols)]

    @property
    def is_valid(self) -> bool:
        return self.d >= 2 and not self.zero_entries()

    def truncate(self, d: int) -> "CumulantMatrix":
        return CumulantMatrix(self.entries[:, :d], self.labels)

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "entries": self.entries.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CumulantMatrix":
        entries = np.asarray(data["entries"], dtype=float)
        n, d = data.get("n"), data.get("d")
        if entries.ndim != 2 or (n is not None and entries.shape[0] != n) or (
            d is not None and entries.shape[1] != d
        ):
            raise ValueError(
                f"entries shape {entries.shape} does not match n={n}, d={d}"
            )
        return cls(entries, tuple(data.get("labels", ())))

    @classmethod
    def from_json(cls, text: str) -> "CumulantMatrix":
        return cls.from_dict(json.loads(text))


def raw_moments(series: ReturnSeries | Sequence[float], d: int) -> np.ndarray:
    """Sample raw moments ``m'_1 .. m'_d`` (averages of powers)."""
    samples = series.samples if isinstance(series, ReturnSeries) else series
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise IngestionError("cannot compute moments of an empty series")
    if not np.all(np.isfinite(x)):
        raise IngestionError("series contains non-finite values")
    powers = x[:, None] ** np.arange(1, d + 1)[None, :]
    return powers.mean(axis=0)


def moments_to_cumulants(moments: Sequence[float]) -> np.ndarray:
    """Cumulants from raw moments.

    Uses ``k_m = m'_m - sum_{j=1}^{m-1} C(m-1, j-1) k_j m'_{m-j}``.
    """
    m = np.asarray(moments, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("moments must be finite")
    kappa = np.zeros_like(m)
    for order in range(1, m.size + 1):
        acc = m[order - 1]
        for j in range(1, order):
            acc -= math.comb(order - 1, j - 1) * kappa[j - 1] * m[order - j - 1]
        kappa[order - 1] = acc
    return kappa


def cumulants_to_moments(cumulants: Sequence[float]) -> np.ndarray:
    """Inverse recursion ``m'_m = sum_{j=1}^{m} C(m-1, j-1) k_j m'_{m-j}``, ``m'_0 = 1``."""
    kappa = np.asarray(cumulants, dtype=float)
    m = np.ones(kappa.size + 1)
    for order in range(1, kappa.size + 1):
        m[order] = sum(
            math.comb(order - 1, j - 1) * kappa[j - 1] * m[order - j]
            for j in range(1, order + 1)
        )
    return m[1:]


def estimate_matrix(series_list: Sequence[ReturnSeries], d: int) -> CumulantMatrix:
    """Stack per-asset cumulants of order ``1..d`` into a :class:`CumulantMatrix`.

    The result may contain zeros; check :attr:`CumulantMatrix.is_valid`.
    """
    if d < 1:
        raise ValueError(f"order d must be positive, got {d}")
    if not series_list:
        raise IngestionError("no return series given")
    rows = []
    for s in series_list:
        if len(s.samples) < d + 1:
            raise IngestionError(
                f"asset {s.asset_id!r}: {len(s.samples)} samples, need at least {d + 1}"
            )
        rows.append(moments_to_cumulants(raw_moments(s, d)))
    return CumulantMatrix(np.vstack(rows), tuple(s.asset_id for s in series_list))


def read_returns_csv(path: str | Path) -> list[ReturnSeries]:
    """One column per asset, one row per period, header row of asset labels."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        columns: list[list[float]] = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            for col, cell in zip(columns, row):
                cell = cell.strip()
                if not cell:
                    raise IngestionError(f"{path}:{lineno}: missing value")
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(f"{path}:{lineno}: not a number: {cell!r}") from None
                if not math.isfinite(value):
                    raise IngestionError(f"{path}:{lineno}: non-finite value {cell!r}")
                col.append(value)
    return [ReturnSeries(label, tuple(col)) for label, col in zip(header, columns)]
