"""The feasible portfolio variety: closure of ``{(sum_i k_ij x_i^j)_j : sum x_i = 1}``.

Dimension is certified by the numerical rank of the parametrization's
Jacobian. Degree is the number of intersection points with a random linear
slice of complementary dimension, computed by homotopy after reducing the
slice equations to top degrees ``d, d-1, ..., d-n+2`` (without that reduction
the system has a positive-dimensional solution set at infinity).
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cumulants import CumulantMatrix
from .polysys import MultiPoly, ParamFamily, PolySystem, random_gamma
from .tracker import BatchSummary, TrackerConfig, dedup, track_all

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-8
PIVOT_TOL = 1e-12
MAX_REDRAWS = 20


class PreconditionError(ValueError):
    pass


def degree_formula(n: int, d: int) -> int:
    """``d (d-1) ... (d-n+2)``; the empty product is 1."""
    return math.prod(range(d - n + 2, d + 1))


class PortfolioMap:
    """``phi'(x_1..x_{n-1}) = (sum_{i<n} k_ij x_i^j + k_nj (1 - sum x_i)^j)_j``."""

    def __init__(self, k: CumulantMatrix | np.ndarray):
        self.k = k if isinstance(k, CumulantMatrix) else CumulantMatrix(np.asarray(k, dtype=float))

    @property
    def n(self) -> int:
        return self.k.n

    @property
    def d(self) -> int:
        return self.k.d

    def _full(self, x_free) -> np.ndarray:
        x_free = np.asarray(x_free)
        if x_free.shape != (self.n - 1,):
            raise ValueError(f"expected {self.n - 1} free coordinates, got shape {x_free.shape}")
        return np.concatenate([x_free, [1.0 - x_free.sum()]])

    def map_full(self, x) -> np.ndarray:
        """``phi`` on all ``n`` coordinates (no constraint applied)."""
        x = np.asarray(x)
        powers = x[:, None] ** np.arange(1, self.d + 1)[None, :]
        return np.sum(self.k.entries * powers, axis=0)

    def map_point(self, x_free) -> np.ndarray:
        return self.map_full(self._full(x_free))

    def map_jacobian(self, x_free) -> np.ndarray:
        """Row ``i``, column ``j``: ``j (x_i^(j-1) k_ij - x_n^(j-1) k_nj)``."""
        x = self._full(x_free)
        j = np.arange(1, self.d + 1)
        pw = x[:, None] ** (j - 1)[None, :]
        scaled = j[None, :] * self.k.entries * pw
        return scaled[:-1] - scaled[-1][None, :]


@dataclass
class VarietyReport:
    n: int
    d: int
    claimed_dimension: int | None = None
    ranks: list[int] = field(default_factory=list)
    singular_values: list[list[float]] = field(default_factory=list)
    expected_degree: int | None = None
    claimed_degree: int | None = None
    degree_lower_bound: int | None = None
    witness_points: list[np.ndarray] = field(default_factory=list)
    witness_x: list[np.ndarray] = field(default_factory=list)
    slice_coefficients: np.ndarray | None = None
    reduction_profile: list[int] = field(default_factory=list)
    slice_solutions: int | None = None
    redraws: int = 0
    tracking: BatchSummary | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"n": self.n, "d": self.d}
        if self.claimed_dimension is not None:
            out.update(
                claimed_dimension=self.claimed_dimension,
                ranks=self.ranks,
                singular_values=self.singular_values,
            )
        if self.expected_degree is not None:
            out.update(
                expected_degree=self.expected_degree,
                claimed_degree=self.claimed_degree,
                degree_lower_bound=self.degree_lower_bound,
                slice_solutions=self.slice_solutions,
                witness_points=[{"re": y.real.tolist(), "im": y.imag.tolist()} for y in self.witness_points],
                witness_x=[{"re": x.real.tolist(), "im": x.imag.tolist()} for x in self.witness_x],
                slice_coefficients=self.slice_coefficients.tolist() if self.slice_coefficients is not None else None,
                reduction_profile=self.reduction_profile,
                redraws=self.redraws,
                tracking=self.tracking.to_dict() if self.tracking else None,
            )
        out["warnings"] = self.warnings
        return out


def numerical_rank(mat: np.ndarray, rtol: float = RANK_RTOL) -> tuple[int, np.ndarray]:
    svals = np.linalg.svd(np.atleast_2d(mat), compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0, svals
    return int(np.sum(svals >= rtol * svals[0])), svals


def dimension_estimate(pm: PortfolioMap, n_samples: int = 100, seed: int = 0) -> VarietyReport:
    """Maximum numerical rank of the Jacobian of ``phi'`` over random simplex points."""
    if pm.d < pm.n - 1:
        raise PreconditionError(f"need d >= n - 1, got n={pm.n}, d={pm.d}")
    report = VarietyReport(pm.n, pm.d)
    if pm.n == 1:
        report.claimed_dimension = 0
        return report
    rng = np.random.default_rng(seed)
    for _ in range(n_samples):
        x = rng.dirichlet(np.ones(pm.n))[:-1]
        r, s = numerical_rank(pm.map_jacobian(x))
        report.ranks.append(r)
        report.singular_values.append(s.tolist())
    report.claimed_dimension = max(report.ranks)
    return report


def _power_sum(k_col: np.ndarray, power: int, scale: float = 1.0):
    n = k_col.size
    for i in range(n):
        exp = [0] * n
        exp[i] = power
        yield scale * k_col[i], exp


def _constraint(n: int) -> MultiPoly:
    terms = [(1.0, [int(i == v) for i in range(n)]) for v in range(n)]
    return MultiPoly(terms + [(-1.0, [0] * n)], n)


@dataclass(frozen=True)
class SlicingSystem:
    coefficients: np.ndarray  # (n-1, d+1); column 0 is the right-hand side c_{l,0}
    reduced: np.ndarray  # (n-1, d) in descending degree order; leading block is the identity
    rhs: np.ndarray
    profile: tuple[int, ...]
    system: PolySystem


def reduce_slices(c: np.ndarray, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian elimination with partial pivoting on the leading ``(n-1) x (n-1)`` block.

    Row ``l`` of the result involves power sums of degree at most ``d - l`` and
    has unit coefficient on degree ``d - l``. Raises ``ZeroDivisionError`` on a
    pivot below ``PIVOT_TOL``.
    """
    m = n - 1
    a = c[:, 1:][:, ::-1].astype(float).copy()  # column q <-> power sum of degree d - q
    b = c[:, 0].astype(float).copy()
    for q in range(m):
        piv = q + int(np.argmax(np.abs(a[q:, q])))
        if abs(a[piv, q]) < PIVOT_TOL:
            raise ZeroDivisionError(f"pivot {abs(a[piv, q]):.3g} at column {q}")
        a[[q, piv]] = a[[piv, q]]
        b[[q, piv]] = b[[piv, q]]
        for r in range(q + 1, m):
            f = a[r, q] / a[q, q]
            a[r] -= f * a[q]
            b[r] -= f * b[q]
    for q in range(m - 1, -1, -1):
        b[q] /= a[q, q]
        a[q] /= a[q, q]
        for r in range(q):
            b[r] -= a[r, q] * b[q]
            a[r] -= a[r, q] * a[q]
    return a, b


def build_slicing_system(pm: PortfolioMap, c: np.ndarray) -> SlicingSystem:
    n, d = pm.n, pm.d
    a, b = reduce_slices(c, n, d)
    eqs = []
    for l in range(n - 1):
        terms = []
        for q in range(l, d):
            if q < n - 1 and q != l:
                continue
            deg = d - q
            terms.extend(_power_sum(pm.k.column(deg), deg, a[l, q]))
        terms.append((-b[l], [0] * n))
        eqs.append(MultiPoly(terms, n))
    eqs.append(_constraint(n))
    profile = tuple(d - l for l in range(n - 1))
    return SlicingSystem(c, a, b, profile, PolySystem(eqs))


def kronecker_start(n: int, d: int) -> tuple[PolySystem, list[np.ndarray]]:
    """``x_l^(d-l+1) = 1`` (``l = 1..n-1``), ``sum x = 1`` with its roots-of-unity solutions."""
    eqs = []
    for l in range(n - 1):
        exp = [0] * n
        exp[l] = d - l
        eqs.append(MultiPoly([(1.0, exp), (-1.0, [0] * n)], n))
    eqs.append(_constraint(n))
    roots = [np.exp(2j * np.pi * np.arange(d - l) / (d - l)) for l in range(n - 1)]
    sols = []
    for combo in itertools.product(*roots):
        head = np.array(combo, dtype=complex)
        sols.append(np.concatenate([head, [1.0 - head.sum()]]))
    return PolySystem(eqs), sols


def slice_residual(c: np.ndarray, y: np.ndarray) -> float:
    """Relative residual of ``sum_j c_{l,j} y_j = c_{l,0}`` at ``y``."""
    lhs = c[:, 1:] @ y
    scale = max(1.0, float(np.max(np.abs(c[:, 1:]) @ np.abs(y))), float(np.max(np.abs(c[:, 0]))))
    return float(np.max(np.abs(lhs - c[:, 0]))) / scale


def degree_compute(pm: PortfolioMap, cfg: TrackerConfig = TrackerConfig(), seed: int = 0) -> VarietyReport:
    """Count the intersection points of the variety with a random complementary linear slice."""
    n, d = pm.n, pm.d
    if d < n - 1:
        raise PreconditionError(f"need d >= n - 1, got n={n}, d={d}")
    report = VarietyReport(n, d, expected_degree=degree_formula(n, d))
    if n == 1:
        y = pm.map_full(np.ones(1))
        report.claimed_degree = report.degree_lower_bound = 1
        report.witness_points, report.witness_x = [y.astype(complex)], [np.ones(1, dtype=complex)]
        return report
    rng = np.random.default_rng(seed)
    for redraw in range(MAX_REDRAWS + 1):
        c = rng.standard_normal((n - 1, d + 1))
        try:
            sl = build_slicing_system(pm, c)
            break
        except ZeroDivisionError as exc:
            logger.info("redrawing slice: %s", exc)
    else:
        raise RuntimeError("could not draw a slice with usable pivots")
    report.redraws = redraw
    report.slice_coefficients = c
    report.reduction_profile = list(sl.profile)

    start, starts = kronecker_start(n, d)
    fam = ParamFamily(start, sl.system, random_gamma(rng))
    paths, summary = track_all(fam, starts, cfg, rng=rng)
    report.tracking = summary
    good = [p for p in paths if p.success]
    clusters = dedup(good, cfg.dedup_radius)
    ys = [pm.map_full(cl.x) for cl in clusters]
    n_points = _count_distinct_relative(ys, cfg.dedup_radius)
    report.witness_x = [cl.x for cl in clusters]
    report.witness_points = ys
    report.slice_solutions = len(clusters)
    report.degree_lower_bound = n_points
    if len(good) < len(paths):
        report.warnings.append(f"{len(paths) - len(good)} of {len(paths)} paths failed")
    if any(cl.multiplicity > 1 for cl in clusters):
        report.warnings.append("coincident endpoints found")
    if not report.warnings:
        report.claimed_degree = n_points
    if n_points != len(clusters):
        # e.g. d = n - 1: the parametrization is onto and finite-to-one
        report.warnings.append(
            f"{len(clusters)} slice solutions map to {n_points} distinct points"
        )
    return report


def _count_distinct_relative(ys, radius: float) -> int:
    reps: list[np.ndarray] = []
    for y in ys:
        if not any(np.max(np.abs(y - r)) < radius * max(1.0, np.max(np.abs(y)), np.max(np.abs(r))) for r in reps):
            reps.append(y)
    return len(reps)


def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """Interior grid ``x_i = a_i / resolution``, ``a_i >= 1``, ``x_n >= 1 / resolution``."""
    m = n - 1
    if m == 0:
        return np.zeros((1, 0))
    pts = [a for a in itertools.product(range(1, resolution), repeat=m) if sum(a) <= resolution - 1]
    return np.array(pts, dtype=float) / resolution


def sample_variety(pm: PortfolioMap, resolution: int = 50) -> np.ndarray:
    """Rows ``(x_1..x_{n-1}, y_1..y_d)`` over the interior simplex grid."""
    xs = simplex_grid(pm.n, resolution)
    ys = np.array([pm.map_point(x) for x in xs])
    return np.hstack([xs, ys])


def point_cloud_header(n: int, d: int) -> list[str]:
    return [f"x{i}" for i in range(1, n)] + [f"y{j}" for j in range(1, d + 1)]


def point_cloud_csv(cloud: np.ndarray, n: int, d: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(point_cloud_header(n, d))
    for row in cloud:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def point_cloud_json(cloud: np.ndarray, n: int, d: int) -> str:
    return json.dumps({"columns": point_cloud_header(n, d), "rows": cloud.tolist()})
