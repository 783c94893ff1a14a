import math

import numpy as np
import pytest

from benchmanip import dist as D
from benchmanip.attack import HypothesisError, mean_attack, median_attack_cost
from benchmanip.bench import BenchmarkSpec, evaluate
from benchmanip.cost import CostModel, Power, Quadratic, ZeroCost
from benchmanip.hetero import (
    Population,
    Subpopulation,
    doubly_symmetric_battery,
    doubly_symmetric_probe,
    doubly_symmetric_values,
    find_symmetry_witness,
    hetero_mean_attack,
    hetero_median_attack,
    perturbation_certificate,
    proportional_costs,
    split_uniform_example,
    stationarity_residual,
    weighted_mean_weights,
)

T = D.Triangular(0.0, 1.0)


def quad(a, k=0.0):
    return CostModel(k, Quadratic(a))


def two(c1, c2, mu=(0.5, 0.5), d=T):
    return Population((Subpopulation(mu[0], d, c1), Subpopulation(mu[1], d, c2)))


def test_weights_examples():
    pop = two(quad(1), quad(2))
    w = weighted_mean_weights(pop, 1.0)
    assert np.allclose(w, (2 / 3, 4 / 3)) and math.isclose(float(pop.masses @ w), 1.0)
    assert np.allclose(weighted_mean_weights(two(quad(1), quad(1)), 3.7), 1.0)
    with pytest.raises(HypothesisError):
        weighted_mean_weights(two(quad(1, 1.0), quad(1)), 1.0)
    with pytest.raises(ValueError):
        weighted_mean_weights(pop, 0.0)


def test_unequal_masses_keep_translation_equivariance():
    pop = two(quad(1), quad(3), mu=(0.25, 0.75))
    w = weighted_mean_weights(pop, 1.0)
    shifted = pop.shifted(0.8)
    spec = BenchmarkSpec.weighted_mean(w)
    assert abs(evaluate(spec, shifted) - evaluate(spec, pop) - 0.8) < 1e-12


def test_hetero_mean_attack():
    pop = two(quad(1), quad(2))
    for P, cost in ((1.0, 1.5), (2.0, 6.0)):
        plan = hetero_mean_attack(pop, P)
        assert math.isclose(plan.cost, cost, rel_tol=1e-12) and abs(plan.achieved - P) <= 1e-9
        assert stationarity_residual(pop, P, plan.deltas) <= 1e-9
        assert perturbation_certificate(pop, P, plan.deltas)
        vals = doubly_symmetric_values(plan.final, plan.weights)
        assert all(abs(v - P) <= 1e-9 for v in vals.values())
    assert not perturbation_certificate(pop, 1.0, [1.2, 0.9])


def test_single_subpopulation_reduces_to_mean_attack():
    pop = Population((Subpopulation(1.0, T, quad(1)),))
    assert math.isclose(hetero_mean_attack(pop, 1.3).cost, mean_attack(quad(1), 1.3, T).cost)
    fixed = Population((Subpopulation(1.0, T, CostModel(1.0, ZeroCost())),))
    assert abs(hetero_median_attack(fixed, 0.5).cost - median_attack_cost(1.0, T, 0.5).cost) < 1e-9


def test_hetero_median_attack():
    k = lambda v: CostModel(v, ZeroCost())  # noqa: E731
    plan = hetero_median_attack(two(k(1), k(2)), 0.5)
    assert abs(plan.cost - 0.5625) < 1e-9 and plan.symmetric(1e-6)
    assert abs(hetero_median_attack(two(k(1), k(1)), 0.5).cost - 0.375) < 1e-9
    with pytest.raises(HypothesisError):
        hetero_median_attack(two(quad(1), k(1)), 0.5)


def test_population_validation():
    with pytest.raises(ValueError):
        Population((Subpopulation(0.5, T, quad(1)),))
    with pytest.raises(ValueError):
        Population((Subpopulation(0.5, D.Uniform(0, 1), quad(1)), Subpopulation(0.5, T, quad(1))))
    with pytest.raises(ValueError):
        Subpopulation(0.0, T, quad(1))


def test_witnesses_on_battery():
    for pop in doubly_symmetric_battery():
        wit = find_symmetry_witness(pop)
        assert wit is not None and wit.center == pop.center
        assert sorted(wit.pairing) == list(range(len(pop.subpops)))
        for i, j in enumerate(wit.pairing):
            assert wit.pairing[j] == i


def test_doubly_symmetric_probe():
    assert doubly_symmetric_probe(BenchmarkSpec.median_of_medians())
    assert doubly_symmetric_probe(BenchmarkSpec.mean_of_medians())
    assert doubly_symmetric_probe(BenchmarkSpec.weighted_mean(price=1.0))
    assert not doubly_symmetric_probe(lambda pop: D.quantile(pop.pooled(), 0.9))


def test_proportional_costs():
    assert proportional_costs(two(quad(1), quad(2)))
    assert not proportional_costs(two(quad(1), CostModel(0.0, Power(1.0, 3.0))))


def test_split_uniform_example():
    r = split_uniform_example()
    assert np.allclose(r.medians, (-0.3, 0.6, 0.9), atol=1e-15)
    assert math.isclose(r.median_of_medians, 0.6, rel_tol=0, abs_tol=2 ** -52)
    assert math.isclose(r.mean_of_medians, 0.4, abs_tol=1e-15)
    assert abs(r.mean_of_medians_mass_weighted) < 1e-15
    assert all(abs(v) <= 1e-9 for v in r.symmetric_values.values())
    assert r.mean_of_medians_discrepancy and any("FLAG" in line for line in r.lines())
