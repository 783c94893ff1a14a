"""Minimum-cost manipulation of price benchmarks under fixed-plus-convex costs."""

from .attack import (
    HypothesisError,
    attack_cost_curve,
    mean_attack,
    median_attack_cost,
    median_symmetric_construction,
    optimal_tau,
    symmetry_certificate,
    trimmed_attack,
)
from .bench import BenchmarkSpec, evaluate, median, symmetric_benchmark_probe, trimmed_mean
from .cost import INF, ConvexTable, CostModel, Power, Quadratic, ZeroCost, average_cost, delta_min
from .dist import AtomDist, Degenerate, GridDist, Triangular, TruncatedGaussian, Uniform
from .hetero import (
    Population,
    Subpopulation,
    doubly_symmetric_probe,
    find_symmetry_witness,
    hetero_mean_attack,
    hetero_median_attack,
    split_uniform_example,
    weighted_mean_weights,
)
from .oracle import SearchConfig, VerifyScenario, min_cost_attack, verify_proposition

__all__ = [
    "AtomDist", "BenchmarkSpec", "ConvexTable", "CostModel", "Degenerate", "GridDist",
    "HypothesisError", "INF", "Population", "Power", "Quadratic", "SearchConfig",
    "Subpopulation", "Triangular", "TruncatedGaussian", "Uniform", "VerifyScenario", "ZeroCost",
    "attack_cost_curve", "average_cost", "delta_min", "doubly_symmetric_probe", "evaluate",
    "find_symmetry_witness", "hetero_mean_attack", "hetero_median_attack", "mean_attack",
    "median", "median_attack_cost", "median_symmetric_construction", "min_cost_attack",
    "optimal_tau", "split_uniform_example", "symmetric_benchmark_probe", "symmetry_certificate",
    "trimmed_attack", "trimmed_mean", "verify_proposition", "weighted_mean_weights",
]
