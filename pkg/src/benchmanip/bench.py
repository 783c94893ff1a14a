"""Benchmark statistics on final price distributions.

Single-distribution kinds: mean, median, tau-trimmed mean. Population kinds
(weighted mean, median of medians, mean of medians) take anything exposing
``subpops`` with ``mu``, ``dist`` and ``cost`` attributes, such as
:class:`benchmanip.hetero.Population`.

The median of a distribution whose CDF sits flat at 1/2 is the midpoint of the
flat stretch, ``(Q(1/2-) + Q(1/2+)) / 2``. That keeps the median (and the
trimmed mean at tau = 1/2) equal to the centre of every symmetric input,
atom distributions included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import dist as D
from .cost import marginal_cost

MEAN = "mean"
MEDIAN = "median"
TRIMMED_MEAN = "trimmed_mean"
WEIGHTED_MEAN = "weighted_mean"
MEDIAN_OF_MEDIANS = "median_of_medians"
MEAN_OF_MEDIANS = "mean_of_medians"

SINGLE_KINDS = (MEAN, MEDIAN, TRIMMED_MEAN)
POPULATION_KINDS = (WEIGHTED_MEAN, MEDIAN_OF_MEDIANS, MEAN_OF_MEDIANS)


@dataclass(frozen=True)
class BenchmarkSpec:
    kind: str
    tau: float = 0.0
    weights: Optional[tuple] = None
    # weighted mean without explicit weights: marginal-cost weights at this price
    price: Optional[float] = None
    mass_weighted: bool = False

    def __post_init__(self):
        if self.kind not in SINGLE_KINDS + POPULATION_KINDS:
            raise ValueError(f"unknown benchmark kind {self.kind!r}")
        if self.kind == TRIMMED_MEAN and not 0.0 <= self.tau <= 0.5:
            raise ValueError(f"trimming quantile {self.tau!r} outside [0, 0.5]")
        if self.kind == WEIGHTED_MEAN:
            if self.weights is not None:
                w = tuple(float(x) for x in self.weights)
                if any(x < 0 for x in w) or not any(x > 0 for x in w):
                    raise ValueError("weights must be non-negative and not all zero")
                object.__setattr__(self, "weights", w)
            elif self.price is None:
                raise ValueError("weighted mean needs explicit weights or a price")

    @classmethod
    def mean(cls) -> "BenchmarkSpec":
        return cls(MEAN)

    @classmethod
    def median(cls) -> "BenchmarkSpec":
        return cls(MEDIAN)

    @classmethod
    def trimmed_mean(cls, tau: float) -> "BenchmarkSpec":
        return cls(TRIMMED_MEAN, tau=float(tau))

    @classmethod
    def weighted_mean(cls, weights=None, price: float | None = None) -> "BenchmarkSpec":
        return cls(WEIGHTED_MEAN, weights=None if weights is None else tuple(weights), price=price)

    @classmethod
    def median_of_medians(cls) -> "BenchmarkSpec":
        return cls(MEDIAN_OF_MEDIANS)

    @classmethod
    def mean_of_medians(cls, mass_weighted: bool = False) -> "BenchmarkSpec":
        return cls(MEAN_OF_MEDIANS, mass_weighted=mass_weighted)

    @property
    def for_population(self) -> bool:
        return self.kind in POPULATION_KINDS

    @property
    def label(self) -> str:
        if self.kind == TRIMMED_MEAN:
            return f"trimmed_mean({self.tau:g})"
        if self.kind == MEAN_OF_MEDIANS and self.mass_weighted:
            return "mean_of_medians(mass)"
        return self.kind


def median(dist: D.Distribution) -> float:
    """Midpoint of the median interval."""
    if isinstance(dist, D.ParametricDist) and not isinstance(dist, D.Degenerate):
        return float(dist.quantile(0.5))
    return 0.5 * (D.quantile(dist, 0.5, "left") + D.quantile(dist, 0.5, "right"))


def _window_weights(cum_lo: np.ndarray, cum_hi: np.ndarray, tau: float) -> np.ndarray:
    """Mass of each ``[cum_lo, cum_hi]`` slice that falls inside ``[tau, 1 - tau]``."""
    return np.clip(np.minimum(cum_hi, 1.0 - tau) - np.maximum(cum_lo, tau), 0.0, None)


def trimmed_mean(dist: D.Distribution, tau: float) -> float:
    if tau == 0.0:
        return D.mean(dist)
    if tau == 0.5:
        return median(dist)
    if isinstance(dist, D.ParametricDist):
        if isinstance(dist, D.Degenerate):
            return float(dist.p)
        dist = D.to_grid(dist)
    if isinstance(dist, D.AtomDist):
        hi_cum = np.cumsum(dist.masses)
        w = _window_weights(hi_cum - dist.masses, hi_cum, tau)
        return float(np.dot(w, dist.positions) / w.sum())
    cum = dist.cumulative
    c0, c1 = cum[:-1], cum[1:]
    w = _window_weights(c0, c1, tau)
    live = w > 0
    span = np.where(live, c1 - c0, 1.0)
    edges = dist.edges
    u0 = np.maximum(c0, tau)
    u1 = np.minimum(c1, 1.0 - tau)
    xa = edges[:-1] + (u0 - c0) / span * dist.dx
    xb = edges[:-1] + (u1 - c0) / span * dist.dx
    return float(np.dot(w[live], 0.5 * (xa + xb)[live]) / w[live].sum())


def _single(spec: BenchmarkSpec, dist: D.Distribution) -> float:
    if spec.kind == MEAN:
        return D.mean(dist)
    if spec.kind == MEDIAN:
        return median(dist)
    return trimmed_mean(dist, spec.tau)


def population_weights(pop, price: float) -> np.ndarray:
    """Per-price weights ``c_i'(P) / sum_j mu_j c_j'(P)``, so that ``sum_i mu_i w_i = 1``."""
    mus = np.array([s.mu for s in pop.subpops])
    slopes = np.array([marginal_cost(s.cost, price) for s in pop.subpops])
    denom = float(np.dot(mus, slopes))
    if denom == 0:
        raise ValueError("all marginal costs vanish at this price")
    return slopes / denom


def _population(spec: BenchmarkSpec, pop) -> float:
    mus = np.array([s.mu for s in pop.subpops])
    if spec.kind == WEIGHTED_MEAN:
        if spec.weights is not None:
            w = np.asarray(spec.weights)
            if w.size != mus.size:
                raise ValueError(f"{w.size} weights for {mus.size} subpopulations")
        else:
            w = population_weights(pop, spec.price)
        means = np.array([D.mean(s.dist) for s in pop.subpops])
        return float(np.dot(mus * w, means) / np.dot(mus, w))
    medians = np.array([median(s.dist) for s in pop.subpops])
    if spec.kind == MEDIAN_OF_MEDIANS:
        return float(np.median(medians))
    if spec.mass_weighted:
        return float(np.dot(mus, medians) / mus.sum())
    return float(np.mean(medians))


def _is_population(obj) -> bool:
    return hasattr(obj, "subpops")


def evaluate(spec: BenchmarkSpec, target) -> float:
    """Value of ``spec`` on a single distribution or on a population."""
    if _is_population(target):
        if not spec.for_population:
            raise ValueError(f"{spec.kind} applies to single distributions; pool the population first")
        return _population(spec, target)
    if spec.for_population:
        raise ValueError(f"{spec.kind} needs a population of subpopulations")
    return _single(spec, target)


Statistic = Union[BenchmarkSpec, Callable[[D.Distribution], float]]


def _as_callable(stat: Statistic) -> Callable:
    if isinstance(stat, BenchmarkSpec):
        return lambda x: evaluate(stat, x)
    return stat


def symmetric_battery(trials: int = 5) -> list[tuple[D.Distribution, float]]:
    """Deterministic symmetric test distributions paired with their centre."""
    out: list[tuple[D.Distribution, float]] = []
    centers = np.linspace(-2.0, 2.0, max(trials, 1))
    for c in centers:
        c = float(c)
        for s in (0.5, 1.0, 3.0):
            out.append((D.Uniform(c - s, c + s), c))
            out.append((D.Triangular(c, s), c))
            out.append((D.TruncatedGaussian(0.5 * s, s, c), c))
            out.append((D.AtomDist.from_pairs([(c - s, 0.5), (c + s, 0.5)]), c))
            out.append((D.AtomDist.from_pairs([(c - s, 0.3), (c, 0.4), (c + s, 0.3)]), c))
    return out


def symmetric_benchmark_probe(stat: Statistic, trials: int = 5, tol: float = 1e-9) -> bool:
    """True iff ``stat`` returns the centre on every member of the symmetric battery."""
    fn = _as_callable(stat)
    return all(abs(fn(d) - c) <= tol for d, c in symmetric_battery(trials))


def symmetric_library(taus=(0.05, 0.1, 1 / 6, 0.25, 0.3, 0.4, 0.45)) -> list[BenchmarkSpec]:
    """The symmetric single-distribution benchmarks this package provides."""
    return [BenchmarkSpec.mean(), BenchmarkSpec.median()] + [
        BenchmarkSpec.trimmed_mean(t) for t in taus
    ]

