"""Cumulant utility ``L(x) = sum_j sum_i w_j k_ij x_i^j`` and its critical structure."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .cumulants import CumulantMatrix

TOL_REAL = 1e-8
TOL_FEASIBLE = 1e-10


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray

    def __post_init__(self):
        arr = np.array(self.w, dtype=float).ravel()
        if arr.size < 1 or not np.all(np.isfinite(arr)):
            raise ValueError("weights must be a non-empty vector of finite reals")
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)

    @property
    def d(self) -> int:
        return self.w.size

    @property
    def leading_nonzero(self) -> bool:
        return self.w[-1] != 0.0


@dataclass(frozen=True)
class UtilityModel:
    k: CumulantMatrix
    w: WeightVector

    def __post_init__(self):
        if not isinstance(self.k, CumulantMatrix):
            object.__setattr__(self, "k", CumulantMatrix(self.k))
        if not isinstance(self.w, WeightVector):
            object.__setattr__(self, "w", WeightVector(self.w))
        if self.k.d != self.w.d:
            raise ValueError(
                f"dimension mismatch: cumulant matrix has d={self.k.d}, weights have {self.w.d}"
            )

    @classmethod
    def from_arrays(cls, k, w) -> "UtilityModel":
        return cls(CumulantMatrix(np.asarray(k, dtype=float)), WeightVector(w))

    @property
    def n(self) -> int:
        return self.k.n

    @property
    def d(self) -> int:
        return self.k.d

    @property
    def is_valid(self) -> bool:
        return self.k.is_valid

    def truncate(self, d: int) -> "UtilityModel":
        return UtilityModel(self.k.truncate(d), WeightVector(self.w.w[:d]))

    def with_weights(self, w) -> "UtilityModel":
        return UtilityModel(self.k, WeightVector(w))

    def to_dict(self) -> dict:
        return {"k": self.k.to_dict(), "w": self.w.w.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "UtilityModel":
        return cls(CumulantMatrix.from_dict(data["k"]), WeightVector(data["w"]))

    @classmethod
    def from_json(cls, text: str) -> "UtilityModel":
        return cls.from_dict(json.loads(text))


class PointClass(str, enum.Enum):
    COMPLEX = "complex"
    REAL = "real"
    REAL_FEASIBLE = "real-feasible"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class PortfolioPoint:
    x: np.ndarray
    lam: complex
    multiplicity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=complex))
        object.__setattr__(self, "lam", complex(self.lam))


def build_asset_polynomials(m: UtilityModel) -> np.ndarray:
    """Ascending coefficients of ``P_i(x) = sum_j j w_j k_ij x^(j-1)``, one row per asset."""
    j = np.arange(1, m.d + 1)
    return m.k.entries * (j * m.w.w)[None, :]


def asset_derivative_polynomials(m: UtilityModel) -> np.ndarray:
    """Ascending coefficients of ``P_i'``, shape ``(n, max(d - 1, 1))``."""
    coeffs = build_asset_polynomials(m)
    if m.d == 1:
        return np.zeros((m.n, 1))
    return np.vstack([npoly.polyder(row) for row in coeffs])


def eval_asset_polynomials(coeffs: np.ndarray, x) -> np.ndarray:
    """Evaluate row ``i`` of ``coeffs`` at ``x[i]`` (Horner, complex-safe)."""
    x = np.asarray(x)
    out = np.zeros(coeffs.shape[0], dtype=np.result_type(x, coeffs))
    for c in coeffs.T[::-1]:
        out = out * x + c
    return out


def evaluate_utility(m: UtilityModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n,):
        raise ValueError(f"expected {m.n} coordinates, got shape {x.shape}")
    powers = x[:, None] ** np.arange(1, m.d + 1)[None, :]
    return float(np.sum(m.w.w[None, :] * m.k.entries * powers))


def utility_gradient(m: UtilityModel, x) -> np.ndarray:
    """``(P_1(x_1), ..., P_n(x_n))``."""
    return eval_asset_polynomials(build_asset_polynomials(m), np.asarray(x))


def global_max_reason(m: UtilityModel) -> str:
    """Why :func:`has_global_max` holds or fails, as a short tag."""
    wd = m.w.w[-1]
    if wd == 0.0:
        return "leading weight zero"
    if m.d % 2:
        return "odd order"
    col = m.k.column(m.d)
    signs = np.sign(col)
    if np.any(signs == 0) or np.any(signs != signs[0]):
        return "mixed signs in top cumulants"
    if np.sign(wd) == signs[0]:
        return "leading weight has same sign as top cumulants"
    return "leading form negative definite"


def has_global_max(m: UtilityModel) -> bool:
    """True iff ``d`` is even, column ``d`` has one sign and ``w_d`` the opposite one."""
    return global_max_reason(m) == "leading form negative definite"


def classify_point(
    p: PortfolioPoint | Sequence[complex],
    tol_real: float = TOL_REAL,
    tol_feasible: float = TOL_FEASIBLE,
) -> PointClass:
    x = np.asarray(p.x if isinstance(p, PortfolioPoint) else p, dtype=complex)
    if np.any(np.abs(x) < tol_feasible):
        return PointClass.DEGENERATE
    if np.max(np.abs(x.imag)) >= tol_real * (1.0 + np.max(np.abs(x.real))):
        return PointClass.COMPLEX
    re = x.real
    if np.all((re > tol_feasible) & (re < 1.0 - tol_feasible)):
        return PointClass.REAL_FEASIBLE
    return PointClass.REAL
