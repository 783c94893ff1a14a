"""Manipulation costs: a fixed charge per touched price plus a convex shift cost.

The average cost ``(k + c(q)) / |q|`` is U-shaped for strictly convex ``c``;
its minimizer ``delta_min`` drives every case split in :mod:`benchmanip.attack`.
``math.inf`` is the "no minimizer" sentinel, which orders above every price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

INF = math.inf
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-9, max_iter: int = 500
) -> float:
    """Minimizer of a unimodal ``f`` on ``[a, b]`` to within ``tol`` in the argument."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class ZeroCost:
    strictly_convex = False

    def value(self, q):
        return np.zeros_like(np.asarray(q, dtype=float)) + 0.0

    def derivative(self, q):
        return np.zeros_like(np.asarray(q, dtype=float)) + 0.0


@dataclass(frozen=True)
class Quadratic:
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("quadratic coefficient must be positive")

    @property
    def strictly_convex(self) -> bool:
        return True

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return self.a * q * q

    def derivative(self, q):
        return 2.0 * self.a * np.asarray(q, dtype=float)

    def delta_min(self, k: float) -> float:
        return math.sqrt(k / self.a)


@dataclass(frozen=True)
class Power:
    a: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not (self.a > 0 and self.p > 1):
            raise ValueError("Power cost needs a > 0 and p > 1")

    @property
    def strictly_convex(self) -> bool:
        return True

    def value(self, q):
        return self.a * np.abs(np.asarray(q, dtype=float)) ** self.p

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        return self.a * self.p * np.sign(q) * np.abs(q) ** (self.p - 1.0)

    def delta_min(self, k: float) -> float:
        return (k / (self.a * (self.p - 1.0))) ** (1.0 / self.p)


@dataclass(frozen=True)
class ConvexTable:
    """Piecewise-linear cost through ``(q, c)`` knots for ``q >= 0``, mirrored for ``q < 0``.

    ``(0, 0)`` is implied. Beyond the last knot the last slope is extended.
    The derivative at a knot is the slope of the segment leading away from zero.
    """

    knots: tuple

    def __post_init__(self):
        pts = sorted((float(q), float(c)) for q, c in self.knots)
        if pts and pts[0][0] == 0.0:
            if pts[0][1] != 0.0:
                raise ValueError("cost table must pass through (0, 0)")
            pts = pts[1:]
        if not pts or pts[0][0] <= 0:
            raise ValueError("cost table needs knots at positive shifts")
        qs = np.array([0.0] + [q for q, _ in pts])
        cs = np.array([0.0] + [c for _, c in pts])
        if np.any(np.diff(qs) <= 0):
            raise ValueError("knot positions must be distinct")
        slopes = np.diff(cs) / np.diff(qs)
        if slopes[0] < 0 or np.any(np.diff(slopes) < 0):
            raise ValueError("cost table is not convex (slopes must be non-decreasing)")
        object.__setattr__(self, "knots", tuple(pts))
        object.__setattr__(self, "_q", qs)
        object.__setattr__(self, "_c", cs)
        object.__setattr__(self, "_slopes", slopes)

    @property
    def strictly_convex(self) -> bool:
        return bool(np.all(np.diff(self._slopes) > 0))

    def value(self, q):
        u = np.abs(np.asarray(q, dtype=float))
        inner = np.interp(u, self._q, self._c)
        tail = self._c[-1] + self._slopes[-1] * (u - self._q[-1])
        return np.where(u <= self._q[-1], inner, tail)

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        seg = np.searchsorted(self._q, np.abs(q), side="right") - 1
        seg = np.clip(seg, 0, self._slopes.size - 1)
        return np.where(q == 0, 0.0, np.sign(q) * self._slopes[seg])

    def tail_intercept(self, k: float) -> float:
        """``b`` in ``avg(q) = s_last + b / q`` beyond the last knot."""
        return k + self._c[-1] - self._slopes[-1] * self._q[-1]


Variable = Union[ZeroCost, Quadratic, Power, ConvexTable]


@dataclass(frozen=True)
class CostModel:
    """Fixed cost ``k`` per manipulated price plus variable cost ``c(q)``."""

    k: float = 0.0
    variable: Variable = Quadratic(1.0)

    def __post_init__(self):
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ValueError(f"fixed cost must be finite and >= 0, got {self.k!r}")
        if isinstance(self.variable, ZeroCost) and self.k == 0:
            raise ValueError("zero fixed and zero variable cost makes every attack free")

    @property
    def strictly_convex(self) -> bool:
        return self.variable.strictly_convex

    @property
    def has_variable_cost(self) -> bool:
        return not isinstance(self.variable, ZeroCost)


def variable_cost(m: CostModel, q):
    out = m.variable.value(q)
    return float(out) if np.ndim(out) == 0 else out


def marginal_cost(m: CostModel, q):
    out = m.variable.derivative(q)
    return float(out) if np.ndim(out) == 0 else out


def shift_cost(m: CostModel, q):
    """Cost of moving one unit of mass by ``q``: ``k + c(q)``, or 0 when ``q == 0``."""
    q = np.asarray(q, dtype=float)
    out = np.where(q != 0, m.k + m.variable.value(q), 0.0)
    return float(out) if out.ndim == 0 else out


def average_cost(m: CostModel, q):
    """``(k + c(q)) / |q|``."""
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr == 0):
        raise ValueError("average cost is undefined at q = 0")
    out = (m.k + m.variable.value(q_arr)) / np.abs(q_arr)
    return float(out) if np.ndim(out) == 0 else out


def delta_min(m: CostModel) -> float:
    """Minimizer of the average cost on ``(0, inf)``; ``INF`` if it keeps decreasing."""
    v = m.variable
    if isinstance(v, ZeroCost):
        return INF
    if m.k == 0:
        return 0.0
    if isinstance(v, (Quadratic, Power)):
        return v.delta_min(m.k)
    # ConvexTable: each segment is s + b/q, so the tail decides whether a minimum exists
    if v.tail_intercept(m.k) > 0:
        return INF
    hi = float(v._q[-1])
    return golden_section_min(lambda q: average_cost(m, q), 1e-12 * hi, hi, tol=1e-9 * max(hi, 1.0))

