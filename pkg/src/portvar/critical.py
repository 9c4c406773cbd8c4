"""Constrained critical points of the cumulant utility.

The system ``P_1(x_1) = P_i(x_i)`` (``i = 2..n``), ``sum x_i = 1`` is solved by a
homotopy in weight space. At ``w = (0, ..., 0, w_d)`` the system reduces to
``k_1d x_1^(d-1) = k_id x_i^(d-1)`` whose ``(d-1)^(n-1)`` solutions are explicit:
``x_i = zeta_i (k_1d / k_id)^(1/(d-1)) x_1`` for roots of unity ``zeta_i``.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import (
    PointClass,
    PortfolioPoint,
    UtilityModel,
    build_asset_polynomials,
    classify_point,
    eval_asset_polynomials,
)
from .polysys import MultiPoly, ParamFamily, PolySystem, random_gamma, solutions_at_infinity_check
from .tracker import BatchSummary, TrackedSolution, TrackerConfig, dedup, min_pairwise_distance, track_all

logger = logging.getLogger(__name__)

DEGENERATE_TUPLE_TOL = 1e-12


class ModelError(ValueError):
    """The model violates a solver precondition (zero leading weight, zero cumulants)."""


class DegreeDropError(ValueError):
    pass


class CountMismatchWarning(UserWarning):
    pass


def expected_count(n: int, d: int) -> int:
    return (d - 1) ** (n - 1)


def strata_count(n: int, d: int) -> int:
    return sum((e - 1) ** (n - 1) for e in range(2, d + 1))


@dataclass(frozen=True)
class CriticalSystem:
    system: PolySystem
    asset_polys: np.ndarray  # ascending coefficients of P_i, one row per asset

    def multiplier(self, x) -> complex:
        """``lambda = P_1(x_1)``."""
        return complex(eval_asset_polynomials(self.asset_polys[:1], np.asarray(x)[:1])[0])


def _univariate_terms(coeffs, var: int, n: int, sign: float = 1.0):
    for power, c in enumerate(coeffs):
        exp = [0] * n
        exp[var] = power
        yield sign * c, exp


def _constraint(n: int) -> MultiPoly:
    terms = [(1.0, [int(i == v) for i in range(n)]) for v in range(n)]
    return MultiPoly(terms + [(-1.0, [0] * n)], n)


def _difference_system(coeffs: np.ndarray) -> PolySystem:
    """``{p_1(x_1) - p_i(x_i), i >= 2} + {sum x - 1}`` for univariate rows ``p_i``."""
    n = coeffs.shape[0]
    eqs = []
    for i in range(1, n):
        terms = list(_univariate_terms(coeffs[0], 0, n)) + list(_univariate_terms(coeffs[i], i, n, -1.0))
        eqs.append(MultiPoly(terms, n))
    eqs.append(_constraint(n))
    return PolySystem(eqs)


def build_critical_system(m: UtilityModel) -> CriticalSystem:
    if m.w.w[-1] == 0.0:
        raise ModelError("w_d is zero: the full-degree system is undefined; use solve_strata")
    coeffs = build_asset_polynomials(m)
    return CriticalSystem(_difference_system(coeffs), coeffs)


@dataclass(frozen=True)
class StartSystem:
    system: PolySystem
    solutions: list[np.ndarray]
    leading: np.ndarray  # top coefficients a_i in a_1 x_1^(d-1) - a_i x_i^(d-1)
    degenerate_tuples: list[tuple[int, ...]] = field(default_factory=list)
    fallback: bool = False


def _roots_of_unity_starts(leading: np.ndarray, d: int):
    n = leading.size
    e = d - 1
    ratios = np.array([complex(leading[0] / leading[i]) ** (1.0 / e) for i in range(1, n)])
    zetas = np.exp(2j * np.pi * np.arange(e) / e)
    sols, bad = [], []
    for idx in itertools.product(range(e), repeat=n - 1):
        coef = np.array([zetas[k] for k in idx]) * ratios
        denom = 1.0 + coef.sum()
        if abs(denom) < DEGENERATE_TUPLE_TOL:
            bad.append(idx)
            continue
        x1 = 1.0 / denom
        sols.append(np.concatenate([[x1], coef * x1]))
    return sols, bad


def _leading_system(leading: np.ndarray, d: int) -> PolySystem:
    n = leading.size
    coeffs = np.zeros((n, d), dtype=complex)
    coeffs[:, d - 1] = leading
    return _difference_system(coeffs)


def build_start_system(m: UtilityModel, rng: np.random.Generator | None = None) -> StartSystem:
    """Closed-form start system with ``(d-1)^(n-1)`` roots-of-unity solutions.

    If some tuple makes ``1 + sum zeta_i (k_1d/k_id)^(1/(d-1))`` vanish, random
    complex leading coefficients are used instead (same degree shape).
    """
    if m.w.w[-1] == 0.0:
        raise ModelError("w_d is zero")
    top = m.k.column(m.d).astype(complex)
    if np.any(top == 0):
        raise ModelError("zero top-order cumulant k_id")
    e = m.d - 1
    if m.n == 1:
        return StartSystem(_constraint_only(), [np.array([1.0 + 0j])], top)
    sols, bad = _roots_of_unity_starts(top, m.d)
    if not bad:
        # scaled by d * w_d: exactly the target system at w = (0, ..., 0, w_d)
        return StartSystem(_leading_system(m.d * m.w.w[-1] * top, m.d), sols, top)
    logger.warning("degenerate start tuples %s; falling back to random leading coefficients", bad)
    rng = rng if rng is not None else np.random.default_rng(0)
    while True:
        leading = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
        sols, bad2 = _roots_of_unity_starts(leading, m.d)
        if not bad2 and len(sols) == e ** (m.n - 1):
            scaled = m.d * m.w.w[-1] * leading
            return StartSystem(_leading_system(scaled, m.d), sols, leading, bad, fallback=True)


def _constraint_only() -> PolySystem:
    return PolySystem([_constraint(1)])


@dataclass
class CriticalResult:
    model: UtilityModel
    points: list[PortfolioPoint]
    paths: list[TrackedSolution]
    summary: BatchSummary
    expected: int
    start_fallback: bool = False
    degenerate_tuples: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def count_matches(self) -> bool:
        return self.count == self.expected and all(p.multiplicity == 1 for p in self.points)

    def classifications(self) -> list[PointClass]:
        return [classify_point(p) for p in self.points]

    def to_dict(self) -> dict:
        sols = []
        reps = self.diagnostics["representatives"]
        for p, cls, rep in zip(self.points, self.classifications(), reps):
            entry = self.paths[rep].to_dict()
            entry.update(
                x_re=[float(v) for v in p.x.real],
                x_im=[float(v) for v in p.x.imag],
                lambda_re=float(p.lam.real),
                lambda_im=float(p.lam.imag),
                classification=cls.value,
                multiplicity=p.multiplicity,
            )
            sols.append(entry)
        return {
            "n": self.model.n,
            "d": self.model.d,
            "expected_count": self.expected,
            "count": self.count,
            "count_matches": self.count_matches,
            "root_convention": "principal branch of (k_1d/k_id)^(1/(d-1))",
            "start_fallback": self.start_fallback,
            "tracking": self.summary.to_dict(),
            "diagnostics": self.diagnostics,
            "solutions": sols,
        }


def solve_critical(
    m: UtilityModel,
    cfg: TrackerConfig = TrackerConfig(),
    *,
    warn: bool = True,
) -> CriticalResult:
    """All complex critical points of ``L`` on ``sum x_i = 1`` via a weight-space homotopy."""
    if m.w.w[-1] == 0.0:
        raise ModelError("w_d is zero: use solve_strata")
    if not m.is_valid:
        raise ModelError(f"cumulant matrix has zero entries at {m.k.zero_entries()}")
    rng = np.random.default_rng(cfg.seed)
    gamma = random_gamma(rng)
    crit = build_critical_system(m)
    start = build_start_system(m, rng)
    fam = ParamFamily(start.system, crit.system, gamma)
    retry = solutions_at_infinity_check(m).clean
    paths, summary = track_all(fam, start.solutions, cfg, retry_failed=retry, rng=rng)
    good = [p for p in paths if p.success]
    clusters = dedup(good, cfg.dedup_radius)
    points = []
    reps = []
    for c in clusters:
        points.append(PortfolioPoint(c.x, crit.multiplier(c.x), c.multiplicity))
        reps.append(good[c.members[0]].path_id)
    expected = expected_count(m.n, m.d)
    result = CriticalResult(m, points, paths, summary, expected, start.fallback,
                            start.degenerate_tuples, {"representatives": reps})
    if not result.count_matches:
        dist, _ = min_pairwise_distance([p.x for p in good])
        svals = [float(np.linalg.svd(crit.system.jacobian(p.x), compute_uv=False)[-1]) for p in good]
        result.diagnostics.update(
            nearest_pair_distance=dist if np.isfinite(dist) else None,
            min_jacobian_singular_value=min(svals) if svals else None,
        )
        if warn:
            warnings.warn(
                f"found {result.count} distinct critical points, expected {expected} "
                f"(nearest pair {dist:.3g}); the weights may be near the discriminant",
                CountMismatchWarning,
                stacklevel=2,
            )
    return result


def solve_strata(m: UtilityModel, cfg: TrackerConfig = TrackerConfig()) -> dict[int, CriticalResult | None]:
    """Solve each truncated model ``w_{e+1..d} = 0`` for ``e = d..2``.

    A stratum whose own top weight ``w_e`` is zero is empty and maps to ``None``.
    """
    if not m.is_valid:
        raise ModelError(f"cumulant matrix has zero entries at {m.k.zero_entries()}")
    out: dict[int, CriticalResult | None] = {}
    for e in range(m.d, 1, -1):
        sub = m.truncate(e)
        out[e] = None if sub.w.w[-1] == 0.0 else solve_critical(sub, cfg)
    return out


def reduced_polynomial_n2(m: UtilityModel) -> np.ndarray:
    """Ascending coefficients of ``P_1(x) - P_2(1 - x)``."""
    if m.n != 2:
        raise ValueError("the two-asset reduction needs n = 2")
    coeffs = build_asset_polynomials(m)
    p1 = np.polynomial.Polynomial(coeffs[0])
    p2 = np.polynomial.Polynomial(coeffs[1])
    q = p1 - p2(np.polynomial.Polynomial([1.0, -1.0]))
    out = np.zeros(m.d)
    out[: q.coef.size] = q.coef
    return out


def companion_roots(coeffs_ascending: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix of a dense polynomial."""
    c = np.asarray(coeffs_ascending, dtype=complex)
    deg = c.size - 1
    if deg < 1:
        return np.zeros(0, dtype=complex)
    if abs(c[-1]) < tol:
        raise DegreeDropError(f"leading coefficient {abs(c[-1]):.3g} below {tol}")
    comp = np.zeros((deg, deg), dtype=complex)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(comp)


def oracle_n2(m: UtilityModel) -> list[PortfolioPoint]:
    """Two-asset critical points from the roots of ``P_1(x) - P_2(1 - x)``."""
    roots = companion_roots(reduced_polynomial_n2(m))
    coeffs = build_asset_polynomials(m)
    pts = []
    for r in roots:
        x = np.array([r, 1.0 - r])
        lam = eval_asset_polynomials(coeffs[:1], x[:1])[0]
        pts.append(PortfolioPoint(x, lam))
    return pts


@dataclass
class OptimizeResult:
    solve: CriticalResult
    best: PortfolioPoint | None
    utility: float | None
    feasible: list[tuple[PortfolioPoint, float]]
    has_global_max: bool
    global_max_reason: str

    def to_dict(self) -> dict:
        out = {
            "has_global_max": self.has_global_max,
            "global_max_reason": self.global_max_reason,
            "n_feasible": len(self.feasible),
        }
        if self.best is None:
            out["best"] = None
            out["message"] = "no interior critical portfolio"
            out["solutions"] = self.solve.to_dict()["solutions"]
        else:
            out["best"] = {"x": [float(v) for v in self.best.x.real], "utility": self.utility,
                           "lambda": float(self.best.lam.real)}
            out["feasible"] = [{"x": [float(v) for v in p.x.real], "utility": u} for p, u in self.feasible]
        return out


def optimize(m: UtilityModel, cfg: TrackerConfig = TrackerConfig(), **classify_kw) -> OptimizeResult:
    """Best interior real critical portfolio by utility value."""
    from .model import evaluate_utility, global_max_reason, has_global_max

    res = solve_critical(m, cfg)
    feasible = []
    for p in res.points:
        if classify_point(p, **classify_kw) is PointClass.REAL_FEASIBLE:
            feasible.append((p, evaluate_utility(m, p.x.real)))
    best = max(feasible, key=lambda pu: pu[1]) if feasible else (None, None)
    return OptimizeResult(res, best[0], best[1], feasible, has_global_max(m), global_max_reason(m))
