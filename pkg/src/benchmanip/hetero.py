"""Populations made of subpopulations with their own price distributions and costs.

Manipulations stay inside a subpopulation. With no fixed costs the cheapest
attack on the marginal-cost-weighted mean shifts every subpopulation by the
same amount; with no variable costs the median attack runs per subpopulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import dist as D
from .attack import HypothesisError, TransportPlan, median_symmetric_construction
from .bench import (
    WEIGHTED_MEAN,
    BenchmarkSpec,
    evaluate,
    median,
    population_weights,
    symmetric_library,
)
from .cost import CostModel, Quadratic, Power, marginal_cost, variable_cost

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class Subpopulation:
    mu: float
    dist: D.Distribution
    cost: CostModel

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"subpopulation mass must be positive, got {self.mu!r}")


def _mixture_kind(subpops) -> str:
    atomic = [D.is_atomic(s.dist) for s in subpops]
    if all(atomic):
        return "atoms"
    if not any(atomic):
        return "density"
    raise ValueError("mixing atomic and continuous subpopulations is not supported")


def _weighted_atoms(sub: Subpopulation) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(sub.dist, D.Degenerate):
        return np.array([sub.dist.p]), np.array([sub.mu])
    return sub.dist.positions, sub.mu * sub.dist.masses


@dataclass(frozen=True)
class Population:
    """Finite list of subpopulations whose pooled distribution is symmetric about ``center``."""

    subpops: tuple
    center: float = 0.0

    def __post_init__(self):
        subs = tuple(self.subpops)
        object.__setattr__(self, "subpops", subs)
        if not subs:
            raise ValueError("population needs at least one subpopulation")
        total = math.fsum(s.mu for s in subs)
        if abs(total - 1.0) > D.MASS_TOL:
            raise ValueError(f"subpopulation masses sum to {total!r}, expected 1")
        if not self.pooled_symmetric(self.center, SYMMETRY_TOL):
            raise ValueError(f"pooled distribution is not symmetric about {self.center}")

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mu for s in self.subpops])

    def support(self) -> tuple[float, float]:
        lows, highs = zip(*(D.support(s.dist) for s in self.subpops))
        return min(lows), max(highs)

    def mixture_pdf(self, x):
        return sum(s.mu * np.asarray(D.pdf(s.dist, x)) for s in self.subpops)

    def pooled(self, n: int = D.DEFAULT_GRID_N) -> D.Distribution:
        """The pooled distribution ``sum_i mu_i F_i``."""
        if _mixture_kind(self.subpops) == "atoms":
            pos, mass = zip(*(_weighted_atoms(s) for s in self.subpops))
            return D.AtomDist(np.concatenate(pos), np.concatenate(mass)).normalized()
        lo, hi = self.support()
        mids = lo + (hi - lo) / n * (np.arange(n) + 0.5)
        return D.GridDist.from_weights(lo, hi, self.mixture_pdf(mids))

    def pooled_symmetric(self, center: float, tol: float) -> bool:
        if _mixture_kind(self.subpops) == "atoms":
            return D.is_symmetric(self.pooled(), center, tol)
        lo, hi = self.support()
        return D.symmetric_density(self.mixture_pdf, center, max(center - lo, hi - center), tol)

    def shifted(self, s: float) -> "Population":
        return Population(
            tuple(Subpopulation(p.mu, D.shift(p.dist, s), p.cost) for p in self.subpops),
            self.center + s,
        )


@dataclass(frozen=True)
class SymmetryWitness:
    """Centre ``X`` and pairing ``y`` with ``mu_i f_i(x) == mu_y(i) f_y(i)(2X - x)``."""

    center: float
    pairing: tuple


def _mirror_match(a: Subpopulation, b: Subpopulation, X: float, lo: float, hi: float, tol: float) -> bool:
    if D.is_atomic(a.dist) and D.is_atomic(b.dist):
        pa, ma = _weighted_atoms(a)
        pb, mb = _weighted_atoms(b)
        A = D.AtomDist(pa, ma / ma.sum()).normalized()
        B = D.AtomDist(pb, mb / mb.sum()).normalized()
        if A.positions.size != B.positions.size or abs(a.mu - b.mu) > tol:
            return False
        return bool(
            np.max(np.abs(A.positions - (2 * X - B.positions)[::-1])) <= tol
            and np.max(np.abs(A.masses - B.masses[::-1])) <= tol
        )
    if D.is_atomic(a.dist) or D.is_atomic(b.dist):
        return False
    x = lo + D.probe_offsets(hi - lo)
    gap = np.abs(a.mu * D.pdf(a.dist, x) - b.mu * D.pdf(b.dist, 2 * X - x))
    return bool(np.max(gap) <= tol)


def find_symmetry_witness(pop: Population, tol: float = SYMMETRY_TOL) -> Optional[SymmetryWitness]:
    """Try the identity pairing, then pair subpopulations mirror-sorted by their means."""
    X = pop.center
    lo, hi = pop.support()
    lo, hi = min(lo, 2 * X - hi), max(hi, 2 * X - lo)
    subs = pop.subpops
    m = len(subs)
    if all(_mirror_match(s, s, X, lo, hi, tol) for s in subs):
        return SymmetryWitness(X, tuple(range(m)))
    order = np.argsort([D.mean(s.dist) for s in subs], kind="stable")
    pairing = [0] * m
    for r in range(m):
        pairing[order[r]] = int(order[m - 1 - r])
    if all(_mirror_match(subs[i], subs[pairing[i]], X, lo, hi, tol) for i in range(m)):
        return SymmetryWitness(X, tuple(pairing))
    return None


def proportional_costs(pop: Population, probes: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)) -> bool:
    """Whether every ``c_i`` is a positive multiple of one common cost function."""
    q = np.asarray(probes, dtype=float)
    base = np.asarray(variable_cost(pop.subpops[0].cost, q))
    if np.any(base <= 0):
        return False
    ratios = [np.asarray(variable_cost(s.cost, q)) / base for s in pop.subpops]
    return all(np.ptp(r) <= 1e-12 * max(1.0, abs(r[0])) and r[0] > 0 for r in ratios)


def _require_no_fixed_cost(pop: Population, P: float):
    if P == 0:
        raise ValueError("target must be non-zero")
    if any(s.cost.k > 0 for s in pop.subpops):
        raise HypothesisError("weighted-mean solution needs k_i = 0 for every subpopulation", "fixed costs")
    if not all(s.cost.strictly_convex for s in pop.subpops):
        raise HypothesisError("weighted-mean solution needs strictly convex variable costs", "convexity")


def weighted_mean_weights(pop: Population, P: float) -> np.ndarray:
    """Per-price weights proportional to marginal cost at ``P``, normalized so ``sum mu_i w_i = 1``."""
    _require_no_fixed_cost(pop, P)
    return population_weights(pop, P)


@dataclass(frozen=True, eq=False)
class HeteroShiftPlan:
    target: float
    weights: np.ndarray
    deltas: np.ndarray
    costs: np.ndarray
    cost: float
    achieved: float
    final: Population


def hetero_mean_attack(pop: Population, P: float) -> HeteroShiftPlan:
    """Shift every subpopulation by ``P``; cost ``sum_i mu_i c_i(P)``."""
    w = weighted_mean_weights(pop, P)
    spec = BenchmarkSpec.weighted_mean(w)
    base = evaluate(spec, pop)
    if abs(base) > SYMMETRY_TOL:
        raise HypothesisError(
            f"unmanipulated weighted mean is {base:.3g}, not 0; subpopulation means do not balance",
            "unbalanced weights",
        )
    deltas = np.full(len(pop.subpops), float(P))
    costs = np.array([s.mu * variable_cost(s.cost, P) for s in pop.subpops])
    final = pop.shifted(P)
    return HeteroShiftPlan(P, w, deltas, costs, math.fsum(costs), evaluate(spec, final), final)


def stationarity_residual(pop: Population, P: float, deltas: Sequence[float]) -> float:
    """Largest violation of ``mu_i c_i'(delta_i) = lambda * mu_i w_i`` at the best single ``lambda``."""
    w = weighted_mean_weights(pop, P)
    mus = pop.masses
    grad = mus * np.array([marginal_cost(s.cost, d) for s, d in zip(pop.subpops, deltas)])
    basis = mus * w
    lam = float(np.dot(grad, basis) / np.dot(basis, basis))
    return float(np.max(np.abs(grad - lam * basis)))


def perturbation_certificate(pop: Population, P: float, deltas: Sequence[float], eps: float = 1e-3) -> bool:
    """Moving any ``delta_i`` by ``+-eps`` and rebalancing another ``delta_j`` never lowers the cost."""
    w = weighted_mean_weights(pop, P)
    mus = pop.masses
    base = np.asarray(deltas, dtype=float)

    def total(ds):
        return math.fsum(s.mu * variable_cost(s.cost, d) for s, d in zip(pop.subpops, ds))

    ref = total(base)
    for i in range(base.size):
        for j in range(base.size):
            if i == j:
                continue
            for e in (eps, -eps):
                ds = base.copy()
                ds[i] += e
                ds[j] -= e * mus[i] * w[i] / (mus[j] * w[j])
                if total(ds) < ref - 1e-12:
                    return False
    return True


def doubly_symmetric_values(pop: Population, weights: Sequence[float]) -> dict:
    """Population benchmarks that read the centre of a doubly symmetric population."""
    specs = [
        BenchmarkSpec.weighted_mean(weights),
        BenchmarkSpec.median_of_medians(),
        BenchmarkSpec.mean_of_medians(),
    ]
    return {s.label: evaluate(s, pop) for s in specs}


@dataclass(frozen=True, eq=False)
class HeteroMedianPlan:
    target: float
    plans: tuple
    costs: np.ndarray
    cost: float

    def symmetric(self, tol: float = 1e-6) -> bool:
        return all(p.symmetric(tol) for p in self.plans)


def hetero_median_attack(pop: Population, P: float, n: int = D.DEFAULT_GRID_N) -> HeteroMedianPlan:
    """Run the symmetric median construction in every subpopulation."""
    if any(s.cost.has_variable_cost for s in pop.subpops):
        raise HypothesisError("median solution needs c_i = 0 for every subpopulation", "variable costs")
    if any(s.cost.k <= 0 for s in pop.subpops):
        raise HypothesisError("median solution needs k_i > 0", "free manipulation")
    for i, s in enumerate(pop.subpops):
        if D.is_atomic(s.dist) or not D.is_symmetric(s.dist, 0.0, SYMMETRY_TOL):
            raise HypothesisError(f"subpopulation {i} is not a density symmetric about 0", "asymmetric subpopulation")
    plans: tuple[TransportPlan, ...] = tuple(
        median_symmetric_construction(s.dist, P, s.cost.k, n) for s in pop.subpops
    )
    costs = np.array([s.mu * p.cost for s, p in zip(pop.subpops, plans)])
    return HeteroMedianPlan(P, plans, costs, math.fsum(costs))


PopulationStatistic = Union[BenchmarkSpec, Callable[[Population], float]]


def doubly_symmetric_battery() -> list[Population]:
    """Populations whose subpopulations are symmetric and mirror each other about the centre."""
    q1, q2 = CostModel(0.0, Quadratic(1.0)), CostModel(0.0, Quadratic(2.0))
    p3 = CostModel(0.0, Power(1.0, 3.0))
    S = Subpopulation
    return [
        Population((S(0.5, D.Triangular(0, 1), q1), S(0.5, D.Triangular(0, 1), q2))),
        Population((S(0.4, D.Triangular(0.7, 1), q1), S(0.6, D.TruncatedGaussian(0.3, 1, 0.7), p3)), 0.7),
        Population((
            S(0.3, D.Uniform(-1, -0.2), q2),
            S(0.4, D.Triangular(0, 0.5), q1),
            S(0.3, D.Uniform(0.2, 1), q2),
        )),
        Population((
            S(0.25, D.Triangular(-1.5, 0.5), p3),
            S(0.5, D.TruncatedGaussian(0.4, 1, -0.5), q1),
            S(0.25, D.Triangular(0.5, 0.5), p3),
        ), -0.5),
        Population((
            S(0.2, D.Degenerate(-1.0), q1),
            S(0.6, D.AtomDist.from_pairs([(-0.5, 0.5), (0.5, 0.5)]), q2),
            S(0.2, D.Degenerate(1.0), q1),
        )),
    ]


def doubly_symmetric_probe(stat: PopulationStatistic, tol: float = SYMMETRY_TOL) -> bool:
    """True iff ``stat`` returns the centre on every doubly symmetric battery member.

    A weighted mean with explicit weights is only probed on members of matching size.
    """
    battery = doubly_symmetric_battery()
    if isinstance(stat, BenchmarkSpec):
        spec = stat
        if spec.kind == WEIGHTED_MEAN and spec.weights is not None:
            battery = [p for p in battery if len(p.subpops) == len(spec.weights)]
            if not battery:
                raise ValueError("no battery population matches the number of weights")
        fn = lambda pop: evaluate(spec, pop)  # noqa: E731
    else:
        fn = stat
    for pop in battery:
        if find_symmetry_witness(pop) is None:
            raise AssertionError("battery population lacks a symmetry witness")
        if abs(fn(pop) - pop.center) > tol:
            return False
    return True


REFERENCE_MEAN_OF_MEDIANS = 0.6


@dataclass(frozen=True)
class SplitUniformReport:
    """Uniform(-1, 1) split into Uniform subpopulations on [-1, .4], [.4, .8], [.8, 1]."""

    masses: tuple
    medians: tuple
    median_of_medians: float
    mean_of_medians: float
    mean_of_medians_mass_weighted: float
    symmetric_values: dict
    reference_mean_of_medians: float = REFERENCE_MEAN_OF_MEDIANS

    @property
    def mean_of_medians_discrepancy(self) -> bool:
        return not math.isclose(self.mean_of_medians, self.reference_mean_of_medians, abs_tol=1e-12)

    def lines(self) -> list[str]:
        out = [
            "subpopulation medians: " + ", ".join(f"{m:g}" for m in self.medians),
            f"median of medians: {self.median_of_medians:.12g}",
            f"mean of medians (unweighted): {self.mean_of_medians:.12g}",
            f"mean of medians (mass-weighted): {self.mean_of_medians_mass_weighted:.12g}",
        ]
        out += [f"{k} on pooled: {v:.3g}" for k, v in self.symmetric_values.items()]
        if self.mean_of_medians_discrepancy:
            out.append(
                f"FLAG: unweighted mean of medians is {self.mean_of_medians:.12g}, "
                f"not {self.reference_mean_of_medians:g} (reference value)"
            )
        return out


def split_uniform_example(n: int = D.DEFAULT_GRID_N) -> SplitUniformReport:
    cost = CostModel(0.0, Quadratic(1.0))
    cuts = [(-1.0, 0.4), (0.4, 0.8), (0.8, 1.0)]
    subs = tuple(Subpopulation((b - a) / 2.0, D.Uniform(a, b), cost) for a, b in cuts)
    pop = Population(subs)
    pooled = pop.pooled(n)
    return SplitUniformReport(
        masses=tuple(s.mu for s in subs),
        medians=tuple(median(s.dist) for s in subs),
        median_of_medians=evaluate(BenchmarkSpec.median_of_medians(), pop),
        mean_of_medians=evaluate(BenchmarkSpec.mean_of_medians(), pop),
        mean_of_medians_mass_weighted=evaluate(BenchmarkSpec.mean_of_medians(True), pop),
        symmetric_values={s.label: evaluate(s, pooled) for s in symmetric_library()},
    )
