"""Multiplicity of critical points and discriminant crossings in weight space.

A critical point ``x`` is multiple iff ``sum_i prod_{j != i} P_j'(x_j) = 0``,
equivalently iff the bordered Jacobian of ``P_i(x_i) - lambda``,
``sum x_i - 1`` in ``(lambda, x)`` is rank deficient.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .critical import CriticalResult, expected_count, solve_critical
from .model import (
    PortfolioPoint,
    UtilityModel,
    asset_derivative_polynomials,
    build_asset_polynomials,
    eval_asset_polynomials,
)
from .tracker import TrackerConfig, min_pairwise_distance

logger = logging.getLogger(__name__)

TOL_DISC = 1e-6
BORDERLINE = 1e-4
TOL_PARTIAL = 1e-8
TOL_RANK = 1e-8
MAX_REFINE = 60
COLLISION_TOL = 1e-5


class Verdict(str, enum.Enum):
    SIMPLE = "simple"
    MULTIPLE = "multiple"
    BORDERLINE = "borderline"


class NotCriticalError(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"point is not a critical point (relative residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class MultiplicityDiagnostic:
    disc_value: complex
    scale: float
    min_singular_value: float
    jacobian_norm: float
    n_zero_partials: int
    verdict: Verdict
    residual: float

    @property
    def relative_disc(self) -> float:
        return abs(self.disc_value) / self.scale

    @property
    def rank_deficient(self) -> bool:
        return self.min_singular_value < TOL_RANK * self.jacobian_norm


def disc_sum(partials) -> complex:
    """``sum_i prod_{j != i} a_j``."""
    a = np.asarray(partials, dtype=complex)
    return complex(sum(np.prod(np.delete(a, i)) for i in range(a.size)))


def bordered_jacobian(partials) -> np.ndarray:
    """Jacobian of ``P_i(x_i) - lambda, sum x - 1`` in ``(lambda, x_1..x_n)``."""
    a = np.asarray(partials, dtype=complex)
    n = a.size
    jac = np.zeros((n + 1, n + 1), dtype=complex)
    jac[:n, 0] = -1.0
    jac[np.arange(n), np.arange(1, n + 1)] = a
    jac[n, 1:] = 1.0
    return jac


def critical_residual(m: UtilityModel, p: PortfolioPoint) -> float:
    coeffs = build_asset_polynomials(m)
    vals = eval_asset_polynomials(coeffs, p.x)
    mags = eval_asset_polynomials(np.abs(coeffs), np.abs(p.x))
    res = max(float(np.max(np.abs(vals - p.lam))), abs(complex(np.sum(p.x)) - 1.0))
    return res / max(1.0, float(np.max(mags)))


def disc_eval(
    m: UtilityModel,
    p: PortfolioPoint,
    *,
    tol_disc: float = TOL_DISC,
    borderline: float = BORDERLINE,
    tol_partial: float = TOL_PARTIAL,
    residual_tol: float = 1e-8,
) -> MultiplicityDiagnostic:
    """Multiplicity test of a critical point by the discriminant sum and the bordered Jacobian."""
    res = critical_residual(m, p)
    if not res < residual_tol:
        raise NotCriticalError(res)
    partials = eval_asset_polynomials(asset_derivative_polynomials(m), p.x)
    mags = np.maximum(1.0, np.abs(partials))
    n = partials.size
    scale = float(max(np.prod(np.delete(mags, i)) for i in range(n)))
    value = disc_sum(partials)
    svals = np.linalg.svd(bordered_jacobian(partials), compute_uv=False)
    zero_floor = tol_partial * max(1.0, float(np.max(np.abs(partials))))
    n_zero = int(np.sum(np.abs(partials) < zero_floor))
    rel = abs(value) / scale
    if rel < tol_disc or n_zero >= 2:
        verdict = Verdict.MULTIPLE
    elif rel < borderline:
        verdict = Verdict.BORDERLINE
    else:
        verdict = Verdict.SIMPLE
    return MultiplicityDiagnostic(value, scale, float(svals[-1]), float(svals[0]), n_zero, verdict, res)


def _elementary_others(a: np.ndarray, k: int) -> complex:
    """``d/d a_k`` of ``sum_i prod_{j != i} a_j``."""
    rest = np.delete(a, k)
    return disc_sum(rest) if rest.size else 0.0


def refine_double_point(m: UtilityModel, direction, x0, s0: float, max_iter: int = 30, tol: float = 1e-14):
    """Newton on ``{critical system, discriminant sum}`` in ``(x, s)`` along ``w + s * direction``.

    Returns ``(x, s, converged)``. A fold of the critical points is a regular
    solution of this square system, so convergence is quadratic.
    """
    direction = np.asarray(direction, dtype=float)
    n, d = m.n, m.d
    z = np.concatenate([np.asarray(x0, dtype=complex), [complex(s0)]])
    jv = np.arange(1, d + 1)
    base = m.k.entries * (jv * m.w.w)[None, :]
    slope = m.k.entries * (jv * direction)[None, :]

    def der(c):
        return np.vstack([np.polynomial.polynomial.polyder(row) for row in c]) if d > 1 else np.zeros((n, 1))

    dbase, dslope = der(base), der(slope)
    ddbase = np.vstack([np.polynomial.polynomial.polyder(row) for row in dbase]) if d > 2 else np.zeros((n, 1))
    ddslope = np.vstack([np.polynomial.polynomial.polyder(row) for row in dslope]) if d > 2 else np.zeros((n, 1))

    def system(z):
        x, s = z[:n], z[n]
        p = eval_asset_polynomials(base + s * slope, x)
        q = eval_asset_polynomials(slope, x)
        dp = eval_asset_polynomials(dbase + s * dslope, x)
        dq = eval_asset_polynomials(dslope, x)
        ddp = eval_asset_polynomials(ddbase + s * ddslope, x)
        f = np.zeros(n + 1, dtype=complex)
        jac = np.zeros((n + 1, n + 1), dtype=complex)
        for r in range(1, n):
            f[r - 1] = p[0] - p[r]
            jac[r - 1, 0] = dp[0]
            jac[r - 1, r] = -dp[r]
            jac[r - 1, n] = q[0] - q[r]
        f[n - 1] = np.sum(x) - 1.0
        jac[n - 1, :n] = 1.0
        f[n] = disc_sum(dp)
        grads = np.array([_elementary_others(dp, k) for k in range(n)])
        jac[n, :n] = grads * ddp
        jac[n, n] = np.sum(grads * dq)
        return f, jac

    for _ in range(max_iter):
        f, jac = system(z)
        try:
            dz = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return z[:n], z[n].real, False
        z = z + dz
        if not np.all(np.isfinite(z)):
            return z[:n], float("nan"), False
        if np.max(np.abs(dz)) <= tol * (1.0 + np.max(np.abs(z))):
            return z[:n], z[n].real, abs(z[n].imag) < 1e-9 * (1 + abs(z[n].real))
    return z[:n], z[n].real, False


@dataclass
class CrossingReport:
    found: bool
    s_star: float | None = None
    weights: list[float] | None = None
    pair: list[PortfolioPoint] = field(default_factory=list)
    merged: PortfolioPoint | None = None
    diagnostic: MultiplicityDiagnostic | None = None
    min_distance: float | None = None
    refined: bool = False
    grid: list[dict] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return self.diagnostic.verdict.value if self.diagnostic else "none-found"

    def to_dict(self) -> dict:
        if not self.found:
            return {"s_star": None, "pair": [], "disc_abs": None, "verdict": "none-found", "grid": self.grid}

        def sol(p):
            return {"x_re": p.x.real.tolist(), "x_im": p.x.imag.tolist(),
                    "lambda_re": p.lam.real, "lambda_im": p.lam.imag}

        return {
            "s_star": self.s_star,
            "weights": self.weights,
            "pair": [sol(p) for p in self.pair],
            "merged": sol(self.merged),
            "disc_abs": abs(self.diagnostic.disc_value),
            "disc_relative": self.diagnostic.relative_disc,
            "min_singular_value": self.diagnostic.min_singular_value,
            "verdict": self.diagnostic.verdict.value,
            "min_distance": self.min_distance,
            "refined": self.refined,
            "grid": self.grid,
        }


def _unit(direction) -> np.ndarray:
    v = np.asarray(direction, dtype=float).ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("direction must be non-zero")
    return v / norm


def _sample(m: UtilityModel, direction: np.ndarray, s: float, cfg: TrackerConfig):
    sub = m.with_weights(m.w.w + s * direction)
    if sub.w.w[-1] == 0.0:
        return None, np.inf
    res = solve_critical(sub, cfg, warn=False)
    pts = [p.x for p in res.paths if p.success]
    dist, _ = min_pairwise_distance(pts)
    if res.count < len(pts):
        dist = 0.0
    return res, dist


def find_collision(
    m: UtilityModel,
    direction,
    s_range: tuple[float, float] = (-1.0, 1.0),
    cfg: TrackerConfig = TrackerConfig(),
    *,
    n_grid: int = 21,
    collision_tol: float = COLLISION_TOL,
) -> CrossingReport:
    """Locate a weight ``w + s * direction`` where two critical points merge.

    Endpoint distances are computed on a grid, local minima are refined by
    golden-section search (at most 60 steps), and the fold is polished by
    Newton on the critical system augmented with the discriminant sum.
    """
    direction = _unit(direction)
    if direction.size != m.d:
        raise ValueError(f"direction needs {m.d} components")
    lo, hi = map(float, s_range)
    grid = np.linspace(lo, hi, n_grid)
    samples = [_sample(m, direction, s, cfg) for s in grid]
    dists = np.array([dist for _, dist in samples])
    expected = expected_count(m.n, m.d)
    log = [{"s": float(s), "min_distance": float(dd) if np.isfinite(dd) else None,
            "count": res.count if res else None} for s, (res, dd) in zip(grid, samples)]

    candidates = []
    for k in range(n_grid):
        left = dists[k - 1] if k > 0 else np.inf
        right = dists[k + 1] if k < n_grid - 1 else np.inf
        res = samples[k][0]
        dropped = res is not None and res.count < expected
        if (dists[k] <= left and dists[k] <= right) or dropped:
            candidates.append(k)
    candidates.sort(key=lambda k: dists[k])

    invphi = (math.sqrt(5) - 1) / 2
    for k in candidates:
        if not np.isfinite(dists[k]):
            continue
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
        c, e = b - invphi * (b - a), a + invphi * (b - a)
        fc, fe = _sample(m, direction, c, cfg)[1], _sample(m, direction, e, cfg)[1]
        for _ in range(MAX_REFINE):
            if abs(b - a) <= 1e-15 * (1.0 + abs(a)):
                break
            if fc <= fe:
                b, e, fe = e, c, fc
                c = b - invphi * (b - a)
                fc = _sample(m, direction, c, cfg)[1]
            else:
                a, c, fc = c, e, fe
                e = a + invphi * (b - a)
                fe = _sample(m, direction, e, cfg)[1]
        s_best = c if fc <= fe else e
        res, dist = _sample(m, direction, s_best, cfg)
        if res is None:
            continue
        pts = [p for p in res.paths if p.success]
        _, pair_idx = min_pairwise_distance([p.x for p in pts])
        if pair_idx is None:
            continue
        sub = m.with_weights(m.w.w + s_best * direction)
        coeffs = build_asset_polynomials(sub)
        pair = [PortfolioPoint(pts[i].x, eval_asset_polynomials(coeffs[:1], pts[i].x[:1])[0]) for i in pair_idx]
        x0 = (pair[0].x + pair[1].x) / 2
        x_star, s_star, refined = refine_double_point(m, direction, x0, s_best)
        width = grid[1] - grid[0] if n_grid > 1 else 0.0
        bracket = (grid[max(k - 1, 0)] - width, grid[min(k + 1, n_grid - 1)] + width)
        if refined and not (lo <= s_star <= hi and bracket[0] <= s_star <= bracket[1]):
            refined = False
        if not refined and dist >= collision_tol:
            logger.debug("candidate near s=%g rejected: min distance %g", s_best, dist)
            continue
        if not refined:
            x_star, s_star = x0, s_best
        star = m.with_weights(m.w.w + s_star * direction)
        cstar = build_asset_polynomials(star)
        merged = PortfolioPoint(x_star, eval_asset_polynomials(cstar[:1], np.asarray(x_star)[:1])[0], 2)
        try:
            diag = disc_eval(star, merged)
        except NotCriticalError:
            continue
        return CrossingReport(True, float(s_star), star.w.w.tolist(), pair, merged, diag, float(dist), refined, log)
    return CrossingReport(False, grid=log)


def collision_verdict(result: CriticalResult, collision_tol: float = COLLISION_TOL) -> Verdict:
    """Multiple when tracked endpoints cluster or nearly coincide."""
    pts = [p.x for p in result.paths if p.success]
    dist, _ = min_pairwise_distance(pts)
    if result.count < result.expected or dist < collision_tol:
        return Verdict.MULTIPLE
    return Verdict.SIMPLE


def disc_poly_check_n2_d4(k, w, cfg: TrackerConfig = TrackerConfig()) -> dict:
    """Cross-check endpoint collisions against the discriminant sum for two assets, order four.

    Only numerical agreement is checked; the discriminant polynomial in
    ``(k, w)`` itself is not reconstructed.
    """
    m = UtilityModel.from_arrays(np.asarray(k, dtype=float) if not hasattr(k, "entries") else k.entries,
                                 w.w if hasattr(w, "w") else w)
    if (m.n, m.d) != (2, 4):
        raise ValueError(f"expected n=2, d=4, got n={m.n}, d={m.d}")
    result = solve_critical(m, cfg, warn=False)
    by_collision = collision_verdict(result)
    diags = []
    for p in result.points:
        try:
            diags.append(disc_eval(m, p))
        except NotCriticalError:
            pass
    verdicts = {dg.verdict for dg in diags}
    if Verdict.MULTIPLE in verdicts:
        by_disc = Verdict.MULTIPLE
    elif Verdict.BORDERLINE in verdicts:
        by_disc = Verdict.BORDERLINE
    else:
        by_disc = Verdict.SIMPLE
    return {
        "collision_verdict": by_collision.value,
        "disc_verdict": by_disc.value,
        "agree": by_collision == by_disc,
        "min_relative_disc": min((dg.relative_disc for dg in diags), default=None),
        "count": result.count,
    }
