"""Predictor-corrector path tracking for ``gamma``-trick homotopies.

Paths run from ``t = 1`` (start system) to ``t = 0`` (target system) with an
Euler predictor on the Davidenko equation ``H_x dx/dt = -H_t`` and a Newton
corrector. Multiple endpoints are not resolved by an endgame; they are
recognised afterwards by clustering (:func:`dedup`).
"""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .polysys import ParamFamily, PolySystem, random_gamma

logger = logging.getLogger(__name__)

DIVERGENCE_RADIUS = 1e10


class PathStatus(str, enum.Enum):
    SUCCESS = "success"
    DIVERGED = "diverged"
    STALLED = "stalled"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class TrackerConfig:
    newton_tol: float = 1e-12
    max_newton_iters: int = 8
    initial_step: float = 0.05
    min_step: float = 1e-7
    max_step: float = 0.1
    step_expand: float = 2.0
    step_shrink: float = 0.5
    max_steps: int = 10_000
    endpoint_polish_iters: int = 20
    dedup_radius: float = 1e-6
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        for name in ("newton_tol", "initial_step", "min_step", "max_step", "step_expand",
                     "step_shrink", "dedup_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_newton_iters", "max_steps", "endpoint_polish_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not self.min_step < self.initial_step:
            raise ValueError("min_step must be smaller than initial_step")
        if not self.step_shrink < 1 < self.step_expand:
            raise ValueError("need step_shrink < 1 < step_expand")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    def updated(self, **overrides) -> "TrackerConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class TrackedSolution:
    x: np.ndarray
    residual: float
    status: PathStatus
    condition_estimate: float
    path_id: int
    steps: int = 0
    t: float = 0.0
    gamma: complex = 1.0
    retried: bool = False

    @property
    def success(self) -> bool:
        return self.status is PathStatus.SUCCESS

    def to_dict(self) -> dict:
        return {
            "x_re": [float(v) for v in self.x.real],
            "x_im": [float(v) for v in self.x.imag],
            "residual": float(self.residual),
            "status": self.status.value,
            "condition": float(self.condition_estimate),
        }


@dataclass
class BatchSummary:
    n_paths: int
    counts: dict[str, int]
    gammas: list[complex] = field(default_factory=list)
    n_retried: int = 0

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "counts": dict(self.counts),
            "gammas": [[g.real, g.imag] for g in self.gammas],
            "n_retried": self.n_retried,
        }


def relative_residual(system: PolySystem, x) -> float:
    """``max |F_r(x)|`` divided by the largest per-equation term magnitude (floor 1)."""
    return float(np.max(np.abs(system.evaluate(x)))) / system.term_magnitude(x)


def _newton(evaluate, jacobian, x, tol, max_iter, contraction, residual_ok=None, first_max=np.inf):
    """Plain Newton; returns ``(x, converged)``.

    Fails early when the first correction exceeds ``first_max`` or a later one
    does not contract by ``contraction``; both guard against jumping onto a
    neighbouring path.
    """
    prev = None
    for _ in range(max_iter):
        try:
            dx = np.linalg.solve(jacobian(x), -evaluate(x))
        except np.linalg.LinAlgError:
            return x, False
        if not np.all(np.isfinite(dx)):
            return x, False
        nd = float(np.linalg.norm(dx, np.inf))
        if prev is None and nd > first_max:
            return x, False
        x = x + dx
        scale = 1.0 + float(np.linalg.norm(x, np.inf))
        if nd <= tol * scale:
            return x, True
        if residual_ok is not None and residual_ok(x):
            return x, True
        if prev is not None and nd > contraction * prev:
            # stagnation at the rounding floor counts as converged
            return x, nd <= 1e-8 * scale
        prev = nd
    return x, False


def track_path(fam: ParamFamily, start, cfg: TrackerConfig = TrackerConfig(), path_id: int = 0) -> TrackedSolution:
    """Track one path of ``fam`` from ``start`` at ``t = 1`` down to ``t = 0``."""
    target = fam.target
    x = np.asarray(start, dtype=complex).ravel().copy()
    t, h = 1.0, cfg.initial_step
    easy = steps = 0

    def finish(status):
        if status is PathStatus.SUCCESS or np.all(np.isfinite(x)):
            res = relative_residual(target, x) if np.all(np.isfinite(x)) else np.inf
            try:
                cond = float(np.linalg.cond(target.jacobian(x)))
            except (np.linalg.LinAlgError, ValueError):
                cond = np.inf
        else:
            res, cond = np.inf, np.inf
        if status is PathStatus.SUCCESS and not res < 10 * cfg.newton_tol:
            status = PathStatus.STALLED
        return TrackedSolution(x, res, status, cond, path_id, steps, t, fam.gamma)

    residual_ok = lambda z: relative_residual(target, z) < cfg.newton_tol

    while t > 0.0:
        if steps >= cfg.max_steps:
            return finish(PathStatus.TRUNCATED)
        steps += 1
        h = min(h, cfg.max_step, t)
        final = h >= t
        t1 = 0.0 if final else t - h
        try:
            v = np.linalg.solve(fam.jacobian(x, t), -fam.dt(x))
        except np.linalg.LinAlgError:
            v = None
        ok = v is not None and np.all(np.isfinite(v))
        if ok:
            pred = float(np.linalg.norm(h * v, np.inf))
            xnorm = 1.0 + float(np.linalg.norm(x, np.inf))
            ok = pred <= 0.25 * xnorm
        if ok:
            x_pred = x - h * v
            # the Euler error is O(h^2); a first correction comparable to the
            # predictor displacement means the step outran the path curvature
            floor = 1e-8 * xnorm
            if final:
                x_new, ok = _newton(target.evaluate, target.jacobian, x_pred, cfg.newton_tol,
                                    cfg.endpoint_polish_iters, 0.75, residual_ok,
                                    first_max=max(pred, floor))
            else:
                x_new, ok = _newton(lambda z: fam.evaluate(z, t1), lambda z: fam.jacobian(z, t1),
                                    x_pred, cfg.newton_tol, cfg.max_newton_iters, 0.25,
                                    first_max=max(0.5 * pred, floor))
        if ok:
            x, t = x_new, t1
            easy += 1
            if easy >= 3:
                h *= cfg.step_expand
                easy = 0
            if float(np.linalg.norm(x, np.inf)) > DIVERGENCE_RADIUS:
                return finish(PathStatus.DIVERGED)
        else:
            easy = 0
            h *= cfg.step_shrink
            if h < cfg.min_step:
                if float(np.linalg.norm(x, np.inf)) > 1e6:
                    return finish(PathStatus.DIVERGED)
                return finish(PathStatus.STALLED)

    # extra polish at t = 0
    x, _ = _newton(target.evaluate, target.jacobian, x, cfg.newton_tol * 1e-2,
                   cfg.endpoint_polish_iters, 0.75)
    return finish(PathStatus.SUCCESS)


def track_all(
    fam: ParamFamily,
    starts: Sequence,
    cfg: TrackerConfig = TrackerConfig(),
    *,
    retry_failed: bool = True,
    rng: np.random.Generator | None = None,
) -> tuple[list[TrackedSolution], BatchSummary]:
    """Track every start; failed paths get one retry with a fresh ``gamma``.

    Output order follows ``starts`` regardless of ``cfg.threads``.
    """
    starts = [np.asarray(s, dtype=complex) for s in starts]
    if rng is None:
        rng = np.random.default_rng([cfg.seed, 7919])

    def run(fam_, items):
        jobs = [(fam_, s, cfg, pid) for pid, s in items]
        if cfg.threads == 1 or len(jobs) < 2:
            return [track_path(*job) for job in jobs]
        workers = None if cfg.threads == 0 else cfg.threads
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: track_path(*job), jobs))

    results = run(fam, list(enumerate(starts)))
    gammas = [fam.gamma]
    n_retried = 0
    if retry_failed:
        failed = [r.path_id for r in results if not r.success]
        if failed:
            g = random_gamma(rng)
            gammas.append(g)
            logger.info("retrying %d failed paths with gamma=%s", len(failed), g)
            for r in run(fam.with_gamma(g), [(pid, starts[pid]) for pid in failed]):
                r.retried = True
                results[r.path_id] = r
            n_retried = len(failed)
    counts = {s.value: 0 for s in PathStatus}
    for r in results:
        counts[r.status.value] += 1
    return results, BatchSummary(len(results), counts, gammas, n_retried)


@dataclass
class Cluster:
    x: np.ndarray
    multiplicity: int
    members: list[int]


def dedup(points: Sequence, radius: float) -> list[Cluster]:
    """Single-linkage clusters under max-norm distance ``< radius``.

    The representative is the cluster mean; clusters keep first-seen order.
    """
    pts = [np.asarray(p.x if isinstance(p, TrackedSolution) else p, dtype=complex) for p in points]
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.max(np.abs(pts[i] - pts[j])) < radius:
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(len(pts)):
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for members in sorted(groups.values(), key=lambda m: m[0]):
        clusters.append(Cluster(np.mean([pts[i] for i in members], axis=0), len(members), members))
    return clusters


def min_pairwise_distance(points: Sequence) -> tuple[float, tuple[int, int] | None]:
    """Smallest max-norm distance between two points and the pair achieving it."""
    pts = [np.asarray(p, dtype=complex) for p in points]
    best, pair = np.inf, None
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            dist = float(np.max(np.abs(pts[i] - pts[j])))
            if dist < best:
                best, pair = dist, (i, j)
    return best, pair
