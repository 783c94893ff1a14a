"""Closed-form cheapest manipulations of the mean, median and trimmed means.

Targets ``P < 0`` are solved as ``|P|`` and mirrored: costs are symmetric, so
the plan for ``-P`` moves the bottom of the distribution down instead of the
top up, at the same cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from . import dist as D
from .bench import BenchmarkSpec, evaluate, symmetric_library
from .cost import INF, CostModel, average_cost, delta_min, marginal_cost, variable_cost

# relative tolerance for "delta_min == 2P" and similar case boundaries
CASE_RTOL = 1e-12


class HypothesisError(ValueError):
    """Inputs fall outside the regime a closed form covers.

    ``regime`` names the regime that applies instead.
    """

    def __init__(self, message: str, regime: str = ""):
        super().__init__(message)
        self.regime = regime


@dataclass(frozen=True)
class Selector:
    """Which mass a uniform shift moves: ``top``, ``bottom``, ``all`` or ``window``."""

    kind: str
    lo: Optional[float] = None
    hi: Optional[float] = None


def shift_mass(atoms: D.AtomDist, mass: float, delta: float, selector: Selector) -> D.AtomDist:
    """Move ``mass`` of ``atoms`` by ``delta``; a straddling atom is split."""
    pos = atoms.positions.copy()
    w = atoms.masses.copy()
    if selector.kind == "all" or mass >= 1.0:
        return D.AtomDist(pos + delta, w)
    if selector.kind == "window":
        inside = (pos >= selector.lo) & (pos <= selector.hi)
        return D.AtomDist(np.where(inside, pos + delta, pos), w)
    if selector.kind == "bottom":
        pos, w = -pos[::-1], w[::-1]
    # walk down from the top atom
    take = np.clip(mass - (np.cumsum(w[::-1]) - w[::-1]), 0.0, w[::-1])[::-1]
    take[take < 1e-15] = 0.0
    keep = w - take
    keep[keep < 1e-15] = 0.0
    step = -delta if selector.kind == "bottom" else delta
    new_pos = np.concatenate((pos[keep > 0], pos[take > 0] + step))
    new_w = np.concatenate((keep[keep > 0], take[take > 0]))
    if selector.kind == "bottom":
        new_pos = -new_pos
    return D.AtomDist(new_pos, new_w)


def source_atoms(source: D.Distribution, n_atoms: int = D.DEFAULT_ATOMS_N) -> D.AtomDist:
    if isinstance(source, D.Degenerate):
        return D.AtomDist(np.array([source.p]), np.array([1.0]))
    if isinstance(source, D.AtomDist):
        return source
    return D.to_atoms(source, n_atoms)


@dataclass(frozen=True)
class UniformShiftPlan:
    benchmark: BenchmarkSpec
    target: float
    delta: float
    mass: float
    selector: Selector
    cost: float
    source: D.Distribution = field(default_factory=D.Degenerate)
    attained: bool = True
    interior_root: Optional[float] = None
    note: str = ""
    n_atoms: int = D.DEFAULT_ATOMS_N

    def final_distribution(self) -> D.AtomDist:
        atoms = source_atoms(self.source, self.n_atoms)
        if self.mass == 0 or not math.isfinite(self.delta):
            return atoms
        return shift_mass(atoms, self.mass, self.delta, self.selector)

    @property
    def achieved(self) -> float:
        if not self.attained:
            return math.nan
        return evaluate(self.benchmark, self.final_distribution())

    def symmetric_final(self, tol: float = 1e-6) -> bool:
        return self.attained and D.is_symmetric(self.final_distribution(), self.target, tol)


def _plan(spec, P, delta, mass, m, source, **kw) -> UniformShiftPlan:
    """Sign-aware constructor; ``delta`` and ``mass`` are for ``|P|``."""
    sel = Selector("all") if mass >= 1.0 else Selector("top" if P > 0 else "bottom")
    cost = mass * (m.k + variable_cost(m, delta))
    return UniformShiftPlan(spec, P, math.copysign(delta, P), mass, sel, cost, source, **kw)


def _trivial(spec, P, source, note) -> UniformShiftPlan:
    return UniformShiftPlan(spec, P, 0.0, 0.0, Selector("all"), 0.0, source, note=note)


def mean_attack(m: CostModel, P: float, dist: D.Distribution | None = None) -> UniformShiftPlan:
    """Cheapest way to move the mean to ``P``: shift mass ``|P|/delta`` by ``delta``.

    ``delta = max(|P|, delta_min)``. With no variable cost the infimum is 0 and
    not attained; the returned plan says so via ``attained=False``.
    """
    source = D.Degenerate(0.0) if dist is None else dist
    spec = BenchmarkSpec.mean()
    if P == 0:
        return _trivial(spec, P, source, "target equals the unmanipulated mean")
    a = abs(P)
    dm = delta_min(m)
    if dm == INF:
        return UniformShiftPlan(
            spec, P, math.copysign(INF, P), 0.0, Selector("top" if P > 0 else "bottom"), 0.0,
            source, attained=False,
            note="infimum 0, unattained: average cost decreases without bound",
        )
    if dm <= a:
        return _plan(spec, P, a, 1.0, m, source)
    return _plan(spec, P, dm, a / dm, m, source)


@dataclass(frozen=True)
class MedianAttack:
    cost: float
    moved_mass: float


def _mass_below(F: D.Distribution, P: float) -> float:
    if isinstance(F, D.AtomDist):
        return float(F.masses[F.positions < P].sum())
    if isinstance(F, D.Degenerate):
        return 1.0 if F.p < P else 0.0
    return D.cdf(F, P)


def median_attack_cost(k: float, F: D.Distribution, P: float) -> MedianAttack:
    """With no variable cost: move the mass between the median and ``P`` up to ``P``.

    Cost ``k * (F(P) - 1/2)``. Negative targets mirror.
    """
    if k <= 0:
        raise ValueError("median attack cost needs a positive fixed cost")
    if P < 0:
        above = 1.0 - D.cdf(F, P)  # mass strictly above P
        moved = max(0.0, above - 0.5)
    else:
        moved = max(0.0, _mass_below(F, P) - 0.5)
    return MedianAttack(k * moved, moved)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Conditional transport keeping the final distribution symmetric about the target.

    ``alpha[i]`` is the share of source cell ``i`` that stays put; the rest is
    spread over ``[P, inf)`` with ``target_density`` (unit mass).
    """

    target: float
    source: D.GridDist
    shifted_source: np.ndarray
    alpha: np.ndarray
    target_density: np.ndarray
    final: D.GridDist
    moved_mass: float
    cost: float

    @property
    def g_tilde(self) -> np.ndarray:
        return 0.5 * (self.source.density + self.shifted_source)

    def symmetric(self, tol: float = 1e-6) -> bool:
        return D.is_symmetric(self.final, self.target, tol)


def median_symmetric_construction(
    F: D.Distribution, P: float, k: float = 1.0, n: int = D.DEFAULT_GRID_N
) -> TransportPlan:
    """Raise the median of ``F`` to ``P > 0`` while leaving a final density symmetric about ``P``.

    A price ``y < P`` keeps ``alpha(y) = g(y) / f(y)`` of its mass, where
    ``g(y) = (f(y) + f(y - 2P)) / 2``, and sends the remainder to ``[P, inf)``
    in proportion to ``g - f``. The resulting density is ``g`` everywhere.
    Cells are exact CDF averages, so both mass identities hold to rounding.
    """
    if P <= 0:
        raise ValueError("construction needs P > 0; mirror the problem for P < 0")
    if D.is_atomic(F):
        raise ValueError("construction needs a density")
    lo_s, hi_s = D.support(F)
    h = max(-lo_s, hi_s)
    if not D.is_symmetric(F, 0.0, 1e-9):
        raise ValueError("unmanipulated density must be symmetric about 0")
    if not P < h:
        raise ValueError(f"target {P} outside the support interior (-{h}, {h})")
    if not D.strictly_single_peaked(F):
        raise ValueError("density is only weakly single-peaked; retention share hits 1")
    cells = n + (n % 2)  # even, so P is a cell edge and the grid mirrors about P
    lo, hi = -h, h + 2.0 * P
    dx = (hi - lo) / cells
    edges = lo + dx * np.arange(cells + 1)
    f = np.clip(np.diff(D.cdf(F, edges)), 0.0, None) / dx
    fs = np.clip(np.diff(D.cdf(F, edges - 2.0 * P)), 0.0, None) / dx
    below = np.arange(cells) < cells // 2
    g = 0.5 * (f + fs)
    live = below & (f > 0)
    if np.any(f[live] <= fs[live]):
        raise ValueError("density is only weakly single-peaked; retention share hits 1")
    alpha = np.where(live, g / np.where(live, f, 1.0), 1.0)
    released = (1.0 - alpha) * f * dx
    moved = math.fsum(released)
    shape = np.where(below, 0.0, g - f)
    target_density = shape / (math.fsum(shape) * dx)
    induced = np.where(below, alpha * f, f + target_density * moved)
    source = D.GridDist(lo, hi, f / (math.fsum(f) * dx))
    final = D.GridDist(lo, hi, induced / (math.fsum(induced) * dx))
    return TransportPlan(P, source, fs, alpha, target_density, final, moved, k * moved)


def trimmed_objective(m: CostModel, tau: float, P: float, delta):
    """Cost of shifting mass ``tau + (1 - 2 tau) P / delta`` by ``delta``."""
    delta = np.asarray(delta, dtype=float)
    total = m.k + m.variable.value(delta)
    return P * (1 - 2 * tau) * total / delta + tau * total


def trimmed_foc(m: CostModel, tau: float, P: float, delta: float) -> float:
    """Derivative of :func:`trimmed_objective` in ``delta``."""
    gap = average_cost(m, delta) - marginal_cost(m, delta)
    return -P * (1 - 2 * tau) * gap / delta + tau * marginal_cost(m, delta)


def interior_root(m: CostModel, tau: float, P: float) -> float:
    """Unique sign change of :func:`trimmed_foc` in ``(0, delta_min)``."""
    dm = delta_min(m)
    if tau == 0:
        return dm
    if dm == INF:
        hi = 1.0
        while trimmed_foc(m, tau, P, hi) <= 0:
            hi *= 2.0
            if hi > 1e12:
                raise HypothesisError("first-order condition never turns positive", "unbounded")
    else:
        hi = dm
    return float(bisect(lambda d: trimmed_foc(m, tau, P, d), 1e-9 * hi, hi,
                        xtol=1e-15, rtol=1e-15, maxiter=200))


def trimmed_attack(m: CostModel, tau: float, P: float) -> UniformShiftPlan:
    """Cheapest shift of a degenerate-at-zero population that moves the tau-trimmed mean to ``P``."""
    if not 0.0 <= tau < 0.5:
        raise ValueError("tau must lie in [0, 0.5); use median_attack_cost for the median")
    if P == 0:
        raise ValueError("target must be non-zero")
    if not m.strictly_convex:
        raise ValueError("trimmed attack needs a strictly convex variable cost")
    a = abs(P)
    dm = delta_min(m)
    spec = BenchmarkSpec.trimmed_mean(tau)
    if dm <= a:
        root, delta = None, a
    else:
        root = interior_root(m, tau, a)
        delta = max(a, root)
    mass = tau + (1.0 - 2.0 * tau) * a / delta
    if not (tau < mass <= 1.0 - tau + 1e-12):
        raise AssertionError(f"moved mass {mass} outside ({tau}, {1 - tau}]")
    return _plan(spec, P, delta, min(mass, 1.0 - tau), m, D.Degenerate(0.0), interior_root=root)


def _regime(dm: float, a: float) -> str:
    if dm <= a:
        return "mean optimal (delta_min <= |P|)"
    if math.isclose(dm, 2 * a, rel_tol=CASE_RTOL):
        return "mean optimal (delta_min == 2|P|)"
    if dm < 2 * a:
        return "untrimmed mean dominates every trimmed mean (delta_min in (|P|, 2|P|))"
    return "trimmed mean optimal (delta_min > 2|P|)"


def optimal_tau(m: CostModel, P: float) -> float:
    """Trimming level ``(1 - c'(2P) / avg(2P)) / 2`` that makes half the mass jump to ``2P``."""
    if P == 0:
        raise ValueError("target must be non-zero")
    a = abs(P)
    dm = delta_min(m)
    if dm < 2 * a and not math.isclose(dm, 2 * a, rel_tol=CASE_RTOL):
        raise HypothesisError(
            f"optimal trimming needs delta_min >= 2|P| (delta_min={dm:.6g}, |P|={a:.6g}): "
            + _regime(dm, a),
            _regime(dm, a),
        )
    # same expression as (1 - c'/avg)/2, rearranged so rational inputs round once
    avg = average_cost(m, 2 * a)
    tau = max(0.0, (avg - marginal_cost(m, 2 * a)) / (2.0 * avg))
    plan = trimmed_attack(m, tau, a)
    if not (math.isclose(abs(plan.delta), 2 * a, rel_tol=1e-9) and abs(plan.mass - 0.5) < 1e-9):
        raise AssertionError(f"tau*={tau} gives delta={plan.delta}, mass={plan.mass}")
    return tau


@dataclass(frozen=True)
class CurveRow:
    tau: float
    interior_root: Optional[float]
    delta: float
    mass: float
    cost: float


def attack_cost_curve(
    m: CostModel, P: float, taus: Sequence[float], threads: int = 1
) -> list[CurveRow]:
    """Closed-form attack cost per trimming level; row order follows ``taus``."""

    def row(tau: float) -> CurveRow:
        plan = trimmed_attack(m, tau, P)
        return CurveRow(tau, plan.interior_root, plan.delta, plan.mass, plan.cost)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, taus))
    return [row(t) for t in taus]


@dataclass(frozen=True)
class SymmetryCertificate:
    symmetric: bool
    worst_gap: float
    values: dict
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.symmetric and self.worst_gap <= self.tol


def symmetry_certificate(final: D.Distribution, P: float, tol: float = 1e-6) -> SymmetryCertificate:
    """Check a final distribution is symmetric about ``P`` and every symmetric benchmark reads ``P``."""
    values = {spec.label: evaluate(spec, final) for spec in symmetric_library()}
    gap = max(abs(v - P) for v in values.values())
    return SymmetryCertificate(D.is_symmetric(final, P, tol), gap, values, tol)
