"""Input coercion shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .cumulants import CumulantMatrix
from .model import UtilityModel, WeightVector


def check_cumulant_matrix(k, *, min_order: int = 1) -> CumulantMatrix:
    if isinstance(k, CumulantMatrix):
        cm = k
    else:
        labels = tuple(str(i) for i in k.index) if hasattr(k, "index") and hasattr(k, "columns") else ()
        cm = CumulantMatrix(check_array(k, dtype=float, ensure_min_samples=1), labels)
    if cm.d < min_order:
        raise ValueError(f"need cumulants up to order {min_order}, got d={cm.d}")
    return cm


def check_weights(w, d: int | None = None) -> WeightVector:
    wv = w if isinstance(w, WeightVector) else WeightVector(check_array(np.atleast_2d(w), dtype=float).ravel())
    if d is not None and wv.d != d:
        raise ValueError(f"expected {d} weights, got {wv.d}")
    return wv


def check_model(k, w) -> UtilityModel:
    cm = check_cumulant_matrix(k)
    return UtilityModel(cm, check_weights(w, cm.d))


def check_portfolios(x, n: int) -> np.ndarray:
    arr = check_array(x, dtype=float)
    if arr.shape[1] != n:
        raise ValueError(f"expected {n} columns, got {arr.shape[1]}")
    return arr
