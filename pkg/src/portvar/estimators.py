"""scikit-learn style front ends.

``CumulantEstimator`` fits per-asset cumulants from returns,
``CriticalPortfolioSolver`` fits the critical points of a utility on a
cumulant matrix, ``FeasiblePortfolioVariety`` fits dimension and degree of
the portfolio cumulant image. All keep the usual ``get_params``/``set_params``
behaviour and store fitted state in trailing-underscore attributes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import critical, model, variety
from ._validation import check_cumulant_matrix, check_portfolios, check_weights
from .cumulants import ReturnSeries, estimate_matrix
from .model import PointClass, UtilityModel
from .tracker import TrackerConfig


class CumulantEstimator(TransformerMixin, BaseEstimator):
    """Per-asset cumulants of order ``1..order`` from a returns matrix.

    ``fit`` takes returns of shape ``(n_periods, n_assets)``. ``transform`` takes
    portfolio weights of shape ``(m, n_assets)`` and returns the portfolio
    cumulants ``sum_i x_i^j k_ij`` of shape ``(m, order)``.
    """

    def __init__(self, order=4):
        self.order = order

    def fit(self, X, y=None):
        names = [str(c) for c in X.columns] if hasattr(X, "columns") else None
        arr = check_array(X, dtype=float, ensure_min_samples=self.order + 1)
        labels = names or [f"asset{i + 1}" for i in range(arr.shape[1])]
        series = [ReturnSeries(lab, arr[:, i]) for i, lab in enumerate(labels)]
        self.cumulant_matrix_ = estimate_matrix(series, self.order)
        self.cumulants_ = np.array(self.cumulant_matrix_.entries)
        self.zero_entries_ = self.cumulant_matrix_.zero_entries()
        self.is_valid_ = self.cumulant_matrix_.is_valid
        self.n_features_in_ = arr.shape[1]
        if names is not None:
            self.feature_names_in_ = np.asarray(names, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "cumulants_")
        x = check_portfolios(X, self.n_features_in_)
        powers = x[:, :, None] ** np.arange(1, self.order + 1)[None, None, :]
        return np.sum(powers * self.cumulants_[None, :, :], axis=1)


class CriticalPortfolioSolver(BaseEstimator):
    """All complex critical points of the cumulant utility with weights ``weights``.

    ``fit(K)`` solves on the ``(n_assets, d)`` cumulant matrix ``K``;
    ``predict(X)`` returns the utility of each portfolio row of ``X``.
    """

    def __init__(self, weights=None, newton_tol=1e-12, dedup_radius=1e-6,
                 tol_real=model.TOL_REAL, tol_feasible=model.TOL_FEASIBLE,
                 random_state=0, threads=1):
        self.weights = weights
        self.newton_tol = newton_tol
        self.dedup_radius = dedup_radius
        self.tol_real = tol_real
        self.tol_feasible = tol_feasible
        self.random_state = random_state
        self.threads = threads

    def _tracker_config(self):
        return TrackerConfig(newton_tol=self.newton_tol, dedup_radius=self.dedup_radius,
                             seed=int(self.random_state or 0), threads=self.threads)

    def fit(self, K, y=None):
        cm = check_cumulant_matrix(K, min_order=2)
        if self.weights is None:
            raise ValueError("weights must be given")
        self.model_ = UtilityModel(cm, check_weights(self.weights, cm.d))
        self.result_ = critical.solve_critical(self.model_, self._tracker_config())
        self.solutions_ = self.result_.points
        self.n_solutions_ = self.result_.count
        self.expected_count_ = self.result_.expected
        self.classes_ = [model.classify_point(p, self.tol_real, self.tol_feasible) for p in self.solutions_]
        feasible = [p for p, c in zip(self.solutions_, self.classes_) if c is PointClass.REAL_FEASIBLE]
        values = [model.evaluate_utility(self.model_, p.x.real) for p in feasible]
        if feasible:
            best = int(np.argmax(values))
            self.optimal_portfolio_ = feasible[best].x.real.copy()
            self.optimal_utility_ = values[best]
        else:
            self.optimal_portfolio_ = None
            self.optimal_utility_ = None
        self.has_global_max_ = model.has_global_max(self.model_)
        self.n_features_in_ = cm.n
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        x = check_portfolios(X, self.n_features_in_)
        return np.array([model.evaluate_utility(self.model_, row) for row in x])


class FeasiblePortfolioVariety(TransformerMixin, BaseEstimator):
    """Dimension and degree of the image of the budget hyperplane under ``x -> (sum_i k_ij x_i^j)_j``.

    ``transform`` maps free coordinates ``(m, n_assets - 1)`` to ``(m, d)``.
    """

    def __init__(self, n_samples=100, compute_degree=True, random_state=0, newton_tol=1e-12, threads=1):
        self.n_samples = n_samples
        self.compute_degree = compute_degree
        self.random_state = random_state
        self.newton_tol = newton_tol
        self.threads = threads

    def fit(self, K, y=None):
        cm = check_cumulant_matrix(K)
        self.map_ = variety.PortfolioMap(cm)
        seed = int(self.random_state or 0)
        dim = variety.dimension_estimate(self.map_, self.n_samples, seed)
        self.dimension_ = dim.claimed_dimension
        self.expected_degree_ = variety.degree_formula(cm.n, cm.d)
        if self.compute_degree:
            cfg = TrackerConfig(newton_tol=self.newton_tol, seed=seed, threads=self.threads)
            self.report_ = variety.degree_compute(self.map_, cfg, seed)
            self.degree_ = self.report_.claimed_degree
            self.witness_points_ = np.array(self.report_.witness_points)
        else:
            self.report_ = dim
            self.degree_ = None
        self.n_features_in_ = cm.n - 1
        return self

    def transform(self, X):
        check_is_fitted(self, "map_")
        if self.n_features_in_ == 0:
            x = np.zeros((len(X), 0))
        else:
            x = check_portfolios(X, self.n_features_in_)
        return np.array([self.map_.map_point(row) for row in x])
