"""Sparse multivariate polynomial systems over the complex numbers.

Only what the homotopies need: exact term-sum evaluation, analytic Jacobians,
scalar combinations, and the ``gamma * t * start + (1 - t) * target`` family.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    pass


class MultiPoly:
    """A polynomial stored as a list of ``(coefficient, exponent vector)`` terms.

    Terms with equal exponents are merged and zero coefficients dropped.
    """

    __slots__ = ("n_vars", "coeffs", "exps")

    def __init__(self, terms: Iterable[tuple[complex, Sequence[int]]], n_vars: int):
        merged: dict[tuple[int, ...], complex] = {}
        for coef, exp in terms:
            exp = tuple(int(e) for e in exp)
            if len(exp) != n_vars:
                raise DimensionError(f"exponent {exp} has length != {n_vars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            merged[exp] = merged.get(exp, 0j) + complex(coef)
        items = sorted((e, c) for e, c in merged.items() if c != 0)
        self.n_vars = n_vars
        self.coeffs = np.array([c for _, c in items], dtype=complex)
        self.exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), n_vars)

    @property
    def terms(self) -> list[tuple[complex, tuple[int, ...]]]:
        return [(complex(c), tuple(int(v) for v in e)) for c, e in zip(self.coeffs, self.exps)]

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self.coeffs) else 0

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        return MultiPoly(self.terms + other.terms, self.n_vars)

    def __mul__(self, scalar: complex) -> "MultiPoly":
        return MultiPoly([(scalar * c, e) for c, e in self.terms], self.n_vars)

    __rmul__ = __mul__

    def __repr__(self):
        return f"MultiPoly({self.terms!r}, n_vars={self.n_vars})"


def _power_table(x: np.ndarray, max_deg: int) -> np.ndarray:
    table = np.ones((x.size, max_deg + 1), dtype=complex)
    for e in range(1, max_deg + 1):
        table[:, e] = table[:, e - 1] * x
    return table


class PolySystem:
    """Square system of :class:`MultiPoly` equations with vectorized evaluation."""

    def __init__(self, equations: Sequence[MultiPoly]):
        equations = list(equations)
        if not equations:
            raise DimensionError("a system needs at least one equation")
        n = equations[0].n_vars
        if any(eq.n_vars != n for eq in equations):
            raise DimensionError("all equations must share the variable set")
        if len(equations) != n:
            raise DimensionError(f"system is not square: {len(equations)} equations in {n} variables")
        self.equations = tuple(equations)
        self.n_vars = n
        self._compile()

    def _compile(self):
        n = self.n_vars
        coeffs, exps, rows = [], [], []
        for r, eq in enumerate(self.equations):
            coeffs.append(eq.coeffs)
            exps.append(eq.exps)
            rows.append(np.full(len(eq.coeffs), r))
        self._c = np.concatenate(coeffs)
        self._e = np.concatenate(exps).reshape(-1, n)
        rows = np.concatenate(rows).astype(np.int64)
        n_terms = self._c.size
        self._max_deg = int(self._e.max()) if n_terms else 0
        self._scatter = np.zeros((n, n_terms))
        self._scatter[rows, np.arange(n_terms)] = 1.0

        # derivative terms: one per (term, variable) with positive exponent
        t_idx, v_idx = np.nonzero(self._e > 0)
        self._dc = self._c[t_idx] * self._e[t_idx, v_idx]
        de = self._e[t_idx].copy()
        de[np.arange(t_idx.size), v_idx] -= 1
        self._de = de.reshape(-1, n)
        self._dscatter = np.zeros((n * n, t_idx.size))
        self._dscatter[rows[t_idx] * n + v_idx, np.arange(t_idx.size)] = 1.0
        self._cols = np.arange(n)[None, :]

    def degrees(self) -> list[int]:
        return [eq.degree for eq in self.equations]

    def bezout_number(self) -> int:
        return int(np.prod(self.degrees()))

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex).ravel()
        if x.size != self.n_vars:
            raise DimensionError(f"expected a point with {self.n_vars} coordinates, got {x.size}")
        return x

    def evaluate(self, x) -> np.ndarray:
        x = self._check(x)
        if not self._c.size:
            return np.zeros(self.n_vars, dtype=complex)
        table = _power_table(x, self._max_deg)
        mon = np.prod(table[self._cols, self._e], axis=1)
        return self._scatter @ (self._c * mon)

    def jacobian(self, x) -> np.ndarray:
        x = self._check(x)
        n = self.n_vars
        if not self._dc.size:
            return np.zeros((n, n), dtype=complex)
        table = _power_table(x, self._max_deg)
        mon = np.prod(table[self._cols, self._de], axis=1)
        return (self._dscatter @ (self._dc * mon)).reshape(n, n)

    def term_magnitude(self, x) -> float:
        """Largest per-equation sum of absolute term values, floor 1 (residual scale)."""
        x = self._check(x)
        if not self._c.size:
            return 1.0
        table = _power_table(x, self._max_deg)
        mon = np.prod(table[self._cols, self._e], axis=1)
        return float(max(1.0, np.max(self._scatter @ np.abs(self._c * mon))))

    def combine(self, a: complex, other: "PolySystem", b: complex) -> "PolySystem":
        """``a * self + b * other``."""
        if other.n_vars != self.n_vars:
            raise DimensionError("systems have different variable counts")
        return PolySystem([a * p + b * q for p, q in zip(self.equations, other.equations)])

    def to_dict(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "equations": [
                [{"re": c.real, "im": c.imag, "exp": list(e)} for c, e in eq.terms]
                for eq in self.equations
            ],
        }

    def dump_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ParamFamily:
    """``H(x, t) = gamma * t * start(x) + (1 - t) * target(x)``."""

    start: PolySystem
    target: PolySystem
    gamma: complex

    def __post_init__(self):
        if self.start.n_vars != self.target.n_vars:
            raise DimensionError("start and target systems differ in size")
        if not np.isclose(abs(self.gamma), 1.0):
            raise ValueError("gamma must have unit modulus")

    @property
    def n_vars(self) -> int:
        return self.target.n_vars

    def evaluate(self, x, t: float) -> np.ndarray:
        return self.gamma * t * self.start.evaluate(x) + (1.0 - t) * self.target.evaluate(x)

    def jacobian(self, x, t: float) -> np.ndarray:
        return self.gamma * t * self.start.jacobian(x) + (1.0 - t) * self.target.jacobian(x)

    def dt(self, x) -> np.ndarray:
        return self.gamma * self.start.evaluate(x) - self.target.evaluate(x)

    def with_gamma(self, gamma: complex) -> "ParamFamily":
        return ParamFamily(self.start, self.target, gamma)


def random_gamma(rng: np.random.Generator) -> complex:
    return complex(np.exp(2j * np.pi * rng.uniform()))


@dataclass(frozen=True)
class InfinityReport:
    clean: bool
    reasons: tuple[str, ...] = ()

    def __str__(self):
        return "clean" if self.clean else "dirty(" + ", ".join(self.reasons) + ")"


def solutions_at_infinity_check(m) -> InfinityReport:
    """Clean iff ``w_d != 0`` and every top-order cumulant ``k_id`` is non-zero."""
    reasons = []
    if m.w.w[-1] == 0.0:
        reasons.append("w_d zero")
    for i, v in enumerate(m.k.column(m.d), start=1):
        if v == 0.0:
            reasons.append(f"k_{i}d zero")
    return InfinityReport(not reasons, tuple(reasons))
