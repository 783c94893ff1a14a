import dataclasses
import math

import numpy as np
import pytest

from benchmanip import dist as D
from benchmanip.attack import mean_attack, trimmed_attack
from benchmanip.bench import BenchmarkSpec, evaluate
from benchmanip.cost import CostModel, Quadratic, ZeroCost, shift_cost
from benchmanip.hetero import Population, Subpopulation
from benchmanip.oracle import (
    SearchConfig,
    VerifyScenario,
    hetero_grid_oracle,
    min_cost_attack,
    rank_weights,
    verify_proposition,
)

Q8 = CostModel(8.0, Quadratic(1.0))
K1 = CostModel(1.0, ZeroCost())


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(delta_grid=1)
    with pytest.raises(ValueError):
        SearchConfig(n_atoms=1)
    with pytest.raises(ValueError):
        SearchConfig(bench_tol=0.0)


def test_examples():
    r = min_cost_attack(D.Degenerate(0.0), Q8, BenchmarkSpec.mean(), 1.0)
    assert abs(r.cost - 5.657) < 1e-3 and r.feasible
    r = min_cost_attack(D.Uniform(-1, 1), K1, BenchmarkSpec.median(), 0.5)
    assert abs(r.cost - 0.25) < 5e-4 and np.count_nonzero(r.dest != r.source) == 500
    r = min_cost_attack(D.Degenerate(0.0), Q8, BenchmarkSpec.trimmed_mean(1 / 6), 1.0)
    assert abs(r.cost - 6.0) < 1e-3


def test_invariants():
    for spec, F, m in [
        (BenchmarkSpec.mean(), D.Triangular(0, 1), Q8),
        (BenchmarkSpec.trimmed_mean(0.2), D.Triangular(0, 1), CostModel(1.0, Quadratic(1.0))),
        (BenchmarkSpec.median(), D.Triangular(0, 1), K1),
    ]:
        r = min_cost_attack(F, m, spec, 0.4)
        per_atom = [shift_cost(m, d - s) for s, d in zip(r.source, r.dest)]
        assert abs(r.cost - math.fsum(x / r.source.size for x in per_atom)) <= 1e-12
        assert r.dest.size == r.source.size
        assert abs(r.achieved - 0.4) <= 1e-4


def test_rank_weights_reproduce_bench():
    rng = np.random.default_rng(1)
    x = np.sort(rng.normal(size=400))
    a = D.AtomDist.equal_mass(x)
    for spec in (BenchmarkSpec.mean(), BenchmarkSpec.median(), BenchmarkSpec.trimmed_mean(0.137)):
        assert abs(rank_weights(spec, x.size) @ x - evaluate(spec, a)) < 1e-12


def test_thread_count_does_not_change_result():
    for spec, F in [(BenchmarkSpec.trimmed_mean(0.2), D.Triangular(0, 1)), (BenchmarkSpec.mean(), D.Degenerate(0.0))]:
        one = min_cost_attack(F, Q8, spec, 1.0, SearchConfig(threads=1))
        four = min_cost_attack(F, Q8, spec, 1.0, SearchConfig(threads=4))
        assert one.cost == four.cost and np.array_equal(one.dest, four.dest) and one.family == four.family


def test_reflection():
    up = min_cost_attack(D.Triangular(0, 1), Q8, BenchmarkSpec.trimmed_mean(0.1), 0.7)
    down = min_cost_attack(D.Triangular(0, 1), Q8, BenchmarkSpec.trimmed_mean(0.1), -0.7)
    assert abs(up.cost - down.cost) < 1e-9


def test_infeasible_is_explicit():
    cfg = SearchConfig(bench_tol=1e-300)
    r = min_cost_attack(D.Triangular(0, 1), Q8, BenchmarkSpec.mean(), 0.3, cfg)
    assert not r.feasible and math.isnan(r.cost) and "no searched plan" in r.note


def test_dispersed_trimmed_is_labelled_upper_bound():
    r = min_cost_attack(D.Triangular(0, 1), Q8, BenchmarkSpec.trimmed_mean(0.2), 0.5)
    assert r.feasible and "upper bound" in r.note


def test_never_better_than_closed_form():
    cases = [
        (BenchmarkSpec.mean(), mean_attack(Q8, 1.0).cost),
        (BenchmarkSpec.trimmed_mean(0.1), trimmed_attack(CostModel(2.0), 0.1, 1.0).cost),
    ]
    r = min_cost_attack(D.Degenerate(0.0), Q8, cases[0][0], 1.0)
    assert r.cost >= cases[0][1] - 1e-3
    r = min_cost_attack(D.Degenerate(0.0), CostModel(2.0), cases[1][0], 1.0)
    assert r.cost >= cases[1][1] - 1e-3


def test_resolution_consistency():
    for spec, F, m in [
        (BenchmarkSpec.mean(), D.Degenerate(0.0), Q8),
        (BenchmarkSpec.median(), D.Triangular(0, 1), K1),
        (BenchmarkSpec.trimmed_mean(1 / 6), D.Degenerate(0.0), Q8),
    ]:
        base = SearchConfig(n_atoms=1000, delta_grid=2000)
        fine = dataclasses.replace(base, n_atoms=2000, delta_grid=4000)
        a, b = (min_cost_attack(F, m, spec, 0.5, c).cost for c in (base, fine))
        # one atom of mass plus one grid step of shift
        bound = (m.k + 1.0) / 1000 + 1e-3
        assert abs(a - b) <= bound


def _pop():
    return Population((
        Subpopulation(0.5, D.Triangular(0, 1), CostModel(0.0, Quadratic(1.0))),
        Subpopulation(0.5, D.Triangular(0, 1), CostModel(0.0, Quadratic(2.0))),
    ))


def test_hetero_grid_oracle():
    for P, cost in ((1.0, 1.5), (2.0, 6.0)):
        r = hetero_grid_oracle(_pop(), (2 / 3, 4 / 3), P)
        assert abs(r.cost - cost) < 1e-3 and np.allclose(r.deltas, P, atol=1e-3)
        assert abs(r.achieved - P) < 1e-9


def test_verify_examples():
    r = verify_proposition("P4", VerifyScenario("k8", Q8, 1.0))
    assert r.passed and dict(r.details)["tau_star"] == pytest.approx(1 / 6)
    r = verify_proposition("P5", VerifyScenario("k2", CostModel(2.0), 1.0))
    assert r.passed and dict(r.details)["strictly_decreasing"]
    r = verify_proposition("P2_median", VerifyScenario("tri", K1, 0.5, D.Triangular(0, 1)))
    assert r.passed and r.closed_form_cost == pytest.approx(0.375) and r.symmetry_pass


def test_verify_hypotheses_unmet():
    assert verify_proposition("P4", VerifyScenario("k2", CostModel(2.0), 1.0)).status == "hypotheses unmet"
    assert verify_proposition("P3", VerifyScenario("k8p1", Q8, 1.0)).status == "hypotheses unmet"
    assert verify_proposition("P2_mean", VerifyScenario("k8", Q8, 1.0)).status == "hypotheses unmet"
    assert verify_proposition("P6_weighted", VerifyScenario("none", Q8, 1.0)).status == "hypotheses unmet"
    with pytest.raises(ValueError):
        verify_proposition("P9", VerifyScenario("x"))


def test_verify_csv_row_shape():
    r = verify_proposition("P3", VerifyScenario("k8p3", Q8, 3.0))
    row = r.csv_row()
    assert len(row) == len(r.CSV_HEADER) and row[-1] == "pass" and row[5] == "true"
