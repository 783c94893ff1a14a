"""Brute-force minimum-cost manipulation on equal-mass atoms.

The search covers structured plan families instead of free per-atom
destinations:

* ``top``: the highest ``j`` atoms all move by one common shift;
* ``window``: a contiguous block of atoms moves by one common shift (trimmed
  means on dispersed inputs only, where the block position matters);
* ``two_level``: the top ``j2`` atoms move by ``d2`` and the next ``j1`` by
  ``d1 <= d2``;
* ``median``: the atoms just below the target are lifted onto it.

Because shifting the top of a sorted sample upward keeps it sorted, every
order-statistic benchmark is affine in the shifts along the ``top`` and
``two_level`` families. The search scans a shift grid, brackets the target
and bisects, and the winner is re-evaluated with :mod:`benchmanip.bench` on
the destination atoms before it is accepted.

Work is split into fixed-size chunks and reduced in chunk order with the
tie-break (cost, shift, moved mass, family key), so the result does not depend
on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import dist as D
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
from .bench import MEAN, MEDIAN, TRIMMED_MEAN, BenchmarkSpec, evaluate
from .cost import INF, CostModel, delta_min, golden_section_min, variable_cost

CHUNK = 128
_SCALE_GRID = np.geomspace(1e-6, 1e6, 1201)


@dataclass(frozen=True)
class SearchConfig:
    n_atoms: int = D.DEFAULT_ATOMS_N
    delta_grid: int = 4000
    mass_step: int = 1  # moved-mass granularity, in atoms
    refine_iters: int = 60
    bench_tol: float = 1e-4
    coarse_grid: int = 40
    window_starts: int = 16
    threads: int = 1

    def __post_init__(self):
        for name in ("n_atoms", "delta_grid", "refine_iters", "coarse_grid", "window_starts"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2")
        if self.mass_step < 1 or self.mass_step > self.n_atoms:
            raise ValueError("mass_step must be between 1 and n_atoms")
        if not self.bench_tol > 0:
            raise ValueError("bench_tol must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass(frozen=True, eq=False)
class DiscreteManipulation:
    """Equal-mass source atoms and where each one ends up."""

    spec: BenchmarkSpec
    target: float
    source: np.ndarray
    dest: np.ndarray
    cost: float
    achieved: float
    family: str
    feasible: bool = True
    note: str = ""

    @property
    def atom_mass(self) -> float:
        return 1.0 / self.source.size

    @property
    def moved_mass(self) -> float:
        return np.count_nonzero(self.dest != self.source) / self.source.size

    @property
    def max_shift(self) -> float:
        return float(np.max(np.abs(self.dest - self.source)))

    def final(self) -> D.AtomDist:
        return D.AtomDist.equal_mass(self.dest)


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def equal_mass_atoms(F: D.Distribution, n: int) -> np.ndarray:
    """Sorted positions of ``n`` equal-mass atoms approximating ``F``."""
    if isinstance(F, D.Degenerate):
        return np.full(n, float(F.p))
    if isinstance(F, D.AtomDist):
        levels = (np.arange(1, n + 1) - 0.5) / n
        return np.array([F.quantile(q) for q in levels])
    return np.array(D.to_atoms(F, n).positions)


def rank_weights(spec: BenchmarkSpec, n: int) -> np.ndarray:
    """Weights on sorted positions so that the benchmark is ``w @ sorted(x)``."""
    if spec.kind == MEAN or (spec.kind == TRIMMED_MEAN and spec.tau == 0):
        return np.full(n, 1.0 / n)
    if spec.kind == MEDIAN or (spec.kind == TRIMMED_MEAN and spec.tau == 0.5):
        w = np.zeros(n)
        if n % 2:
            w[n // 2] = 1.0
        else:
            w[n // 2 - 1] = w[n // 2] = 0.5
        return w
    if spec.kind == TRIMMED_MEAN:
        tau = spec.tau
        r = np.arange(n)
        w = np.clip(np.minimum((r + 1) / n, 1 - tau) - np.maximum(r / n, tau), 0.0, None)
        return w / w.sum()
    raise ValueError(f"oracle handles mean, median and trimmed means, not {spec.kind}")


def _achieved(spec: BenchmarkSpec, dest: np.ndarray, P: float) -> float:
    final = D.AtomDist.equal_mass(dest)
    if spec.kind == MEDIAN:
        # any point of the median interval counts as reaching P
        lo, hi = D.quantile(final, 0.5, "left"), D.quantile(final, 0.5, "right")
        return float(min(max(P, lo), hi))
    return evaluate(spec, final)


def _plan_cost(m: CostModel, src: np.ndarray, dest: np.ndarray) -> float:
    q = dest - src
    moved = q != 0
    per = np.where(moved, m.k + np.asarray(m.variable.value(q)), 0.0)
    return math.fsum(per / src.size)


def _shift_scale(m: CostModel, gap: float) -> float:
    """Upper end of the shift grid: 4 max(gap, crude argmin of the average cost)."""
    avg = (m.k + np.asarray(m.variable.value(_SCALE_GRID))) / _SCALE_GRID
    i = int(np.argmin(avg))
    scale = gap if i == _SCALE_GRID.size - 1 else max(gap, float(_SCALE_GRID[i]))
    return 4.0 * scale


@dataclass(frozen=True)
class _Candidate:
    cost: float
    delta: float
    moved: int
    key: tuple
    dest: np.ndarray = field(compare=False, repr=False)

    @property
    def order(self) -> tuple:
        return (self.cost, self.delta, self.moved, self.key)


def _best(cands: Sequence[Optional[_Candidate]]) -> Optional[_Candidate]:
    live = [c for c in cands if c is not None]
    return min(live, key=lambda c: c.order) if live else None


def _bisect_affine(b0, slope, P, lo, hi, iters):
    """Vectorized bisection for the smallest shift with ``b0 + slope * d >= P``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = b0 + slope * mid >= P
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


def _top_family(x, w, b0, P, m, grid, cfg) -> Optional[_Candidate]:
    n = x.size
    tail = np.cumsum(w[::-1])  # tail[j - 1]: weight on the top j ranks
    counts = np.arange(cfg.mass_step, n + 1, cfg.mass_step)
    if counts[-1] != n:
        counts = np.append(counts, n)
    chunks = [counts[i:i + CHUNK] for i in range(0, counts.size, CHUNK)]

    def run(js: np.ndarray) -> Optional[_Candidate]:
        slope = tail[js - 1]
        reach = b0 + slope[:, None] * grid[None, :] >= P
        hit = reach.any(axis=1) & (slope > 0)
        if not hit.any():
            return None
        js, slope, reach = js[hit], slope[hit], reach[hit]
        idx = np.argmax(reach, axis=1)
        lo = np.where(idx > 0, grid[np.maximum(idx - 1, 0)], 0.0)
        d = _bisect_affine(b0, slope, P, lo, grid[idx], cfg.refine_iters)
        cost = js / n * (m.k + np.asarray(m.variable.value(d)))
        i = np.lexsort((js, d, cost))[0]
        j = int(js[i])
        dest = x.copy()
        dest[n - j:] += d[i]
        return _Candidate(float(cost[i]), float(d[i]), j, ("top", j), dest)

    return _best(_pmap(run, chunks, cfg.threads))


def _coarse_counts(n: int, cfg: SearchConfig) -> np.ndarray:
    raw = np.linspace(cfg.mass_step, n, cfg.coarse_grid)
    counts = np.round(raw / cfg.mass_step).astype(int) * cfg.mass_step
    return np.unique(np.clip(counts, cfg.mass_step, n))


def _window_family(x, w, b0, P, m, grid, cfg) -> Optional[_Candidate]:
    n = x.size
    coarse = np.linspace(grid[-1] / cfg.coarse_grid, grid[-1], cfg.coarse_grid)
    tasks = []
    for j in _coarse_counts(n, cfg):
        starts = np.unique(np.round(np.linspace(0, n - j, cfg.window_starts)).astype(int))
        tasks += [(int(j), int(s)) for s in starts if s < n - j]

    def bench(j, s, d):
        y = x.copy()
        y[s:s + j] += d
        return float(np.dot(w, np.sort(y)))

    def run(task) -> Optional[_Candidate]:
        j, s = task
        vals = [bench(j, s, d) for d in coarse]
        idx = next((i for i, v in enumerate(vals) if v >= P), None)
        if idx is None:
            return None
        lo, hi = (coarse[idx - 1] if idx else 0.0), coarse[idx]
        for _ in range(cfg.refine_iters):
            mid = 0.5 * (lo + hi)
            if bench(j, s, mid) >= P:
                hi = mid
            else:
                lo = mid
        dest = x.copy()
        dest[s:s + j] += hi
        cost = j / n * (m.k + variable_cost(m, hi))
        return _Candidate(cost, float(hi), j, ("window", s, j), dest)

    return _best(_pmap(run, tasks, cfg.threads))


def _two_level_family(x, w, b0, P, m, grid, cfg) -> Optional[_Candidate]:
    n = x.size
    tail = np.cumsum(w[::-1])
    coarse = np.linspace(grid[-1] / cfg.coarse_grid, grid[-1], cfg.coarse_grid)
    counts = _coarse_counts(n, cfg)
    best = None
    for j2 in counts:
        for j1 in counts[counts <= n - j2]:
            w2 = tail[j2 - 1]
            w1 = tail[j1 + j2 - 1] - w2
            if w1 <= 0:
                continue
            d1 = (P - b0 - coarse * w2) / w1
            ok = (d1 > 0) & (d1 <= coarse)
            if not ok.any():
                continue
            cost = (j1 * (m.k + np.asarray(m.variable.value(d1))) + j2 * (m.k + np.asarray(m.variable.value(coarse)))) / n
            cost = np.where(ok, cost, np.inf)
            i = int(np.argmin(cost))
            cand = (float(cost[i]), float(coarse[i]), int(j1 + j2), ("two_level", int(j1), int(j2)), i)
            if best is None or cand[:4] < best[:4]:
                best = cand
    if best is None:
        return None
    _, _, _, (_, j1, j2), i = best
    w2 = tail[j2 - 1]
    w1 = tail[j1 + j2 - 1] - w2

    def total(d2: float) -> float:
        d1 = (P - b0 - d2 * w2) / w1
        if not 0 < d1 <= d2:
            return math.inf
        return (j1 * (m.k + variable_cost(m, d1)) + j2 * (m.k + variable_cost(m, d2))) / n

    lo = coarse[i - 1] if i > 0 else 0.0
    hi = coarse[min(i + 1, coarse.size - 1)]
    d2 = golden_section_min(total, lo, hi, tol=1e-12 * max(hi, 1.0), max_iter=cfg.refine_iters * 4)
    if not math.isfinite(total(d2)):
        d2 = float(coarse[i])
    d1 = (P - b0 - d2 * w2) / w1
    # nudge onto the feasible side of the affine constraint
    while b0 + d1 * w1 + d2 * w2 < P:
        d1 = math.nextafter(d1, math.inf)
    dest = x.copy()
    dest[n - j2:] += d2
    dest[n - j1 - j2:n - j2] += d1
    return _Candidate(total(d2), d2, j1 + j2, ("two_level", j1, j2), dest)


def _median_family(x, P, m) -> Optional[_Candidate]:
    n = x.size
    below = int(np.searchsorted(x, P, side="left"))
    if below <= n // 2:
        return None
    dest = x.copy()
    dest[n // 2:below] = P
    moved = below - n // 2
    cost = _plan_cost(m, x, dest)
    return _Candidate(cost, float(P - x[n // 2]), moved, ("median", n // 2, below), dest)


def min_cost_attack(
    F: D.Distribution,
    m: CostModel,
    spec: BenchmarkSpec,
    P: float,
    cfg: SearchConfig = SearchConfig(),
) -> DiscreteManipulation:
    """Cheapest plan, over the structured families, moving ``spec`` to ``P``.

    Returns an explicit infeasible result (``feasible=False``, ``cost=nan``)
    when no searched plan lands within ``cfg.bench_tol`` of ``P``.
    """
    if spec.for_population:
        raise ValueError("oracle handles single-distribution benchmarks; see hetero_grid_oracle")
    src = equal_mass_atoms(F, cfg.n_atoms)
    w = rank_weights(spec, src.size)
    b0 = _achieved(spec, src, P)
    if abs(b0 - P) <= cfg.bench_tol:
        return DiscreteManipulation(spec, P, src, src.copy(), 0.0, b0, "none", note="target already met")
    flip = P < b0
    x = -src[::-1] if flip else src
    t, base = (-P, -b0) if flip else (P, b0)

    grid_max = _shift_scale(m, t - base)
    grid = np.linspace(grid_max / cfg.delta_grid, grid_max, cfg.delta_grid)
    cands = [
        _top_family(x, w, base, t, m, grid, cfg),
        _two_level_family(x, w, base, t, m, grid, cfg),
    ]
    dispersed = x[-1] > x[0]
    if spec.kind == TRIMMED_MEAN and 0 < spec.tau < 0.5 and dispersed:
        cands.append(_window_family(x, w, base, t, m, grid, cfg))
    if spec.kind == MEDIAN:
        cands.append(_median_family(x, t, m))

    ranked = sorted((c for c in cands if c is not None), key=lambda c: c.order)
    for c in ranked:
        dest = -c.dest[::-1] if flip else c.dest
        achieved = _achieved(spec, dest, P)
        if abs(achieved - P) <= cfg.bench_tol:
            note = ""
            if spec.kind == TRIMMED_MEAN and 0 < spec.tau < 0.5 and dispersed:
                note = "family-restricted minimum on a dispersed input: an upper bound, not a proven optimum"
            return DiscreteManipulation(
                spec, P, src, dest, _plan_cost(m, src, dest), achieved, c.key[0], True, note
            )
    return DiscreteManipulation(
        spec, P, src, src.copy(), math.nan, b0, "none", False,
        f"no searched plan reaches {P:g} within {cfg.bench_tol:g} "
        f"(shifts up to {grid_max:g}, {cfg.n_atoms} atoms)",
    )


def tau_sweep(m: CostModel, P: float, taus: Sequence[float], cfg: SearchConfig = SearchConfig()) -> list[tuple]:
    """``(tau, closed_form_cost, oracle_cost)`` rows on the no-dispersion input."""
    closed = attack_cost_curve(m, P, taus, threads=cfg.threads)
    rows = []
    for row in closed:
        plan = min_cost_attack(D.Degenerate(0.0), m, BenchmarkSpec.trimmed_mean(row.tau), P, cfg)
        rows.append((row.tau, row.cost, plan.cost))
    return rows


# -- heterogeneous populations --------------------------------------------


@dataclass(frozen=True, eq=False)
class HeteroOracleResult:
    deltas: np.ndarray
    cost: float
    achieved: float
    grid_n: int


def hetero_grid_oracle(pop, weights: Sequence[float], P: float, grid_n: int = 4001) -> HeteroOracleResult:
    """Grid search over per-subpopulation shifts ``delta_i`` for a weighted mean.

    The last shift is solved from the weighted-mean constraint; the others
    range over a grid (refined by golden section when there are two
    subpopulations).
    """
    subs = pop.subpops
    mus = np.array([s.mu for s in subs])
    w = np.asarray(weights, dtype=float)
    mw = mus * w
    if mw[-1] <= 0:
        raise ValueError("last subpopulation needs a positive weight")
    means = np.array([D.mean(s.dist) for s in subs])
    base = float(np.dot(mw, means) / mw.sum())
    need = (P - base) * mw.sum()  # required value of sum mu_i w_i delta_i
    free = len(subs) - 1
    span = 4.0 * max(abs(P - base), 1e-12)

    def costs(ds: np.ndarray) -> np.ndarray:
        out = 0.0
        for i, s in enumerate(subs):
            d = ds[..., i]
            out = out + s.mu * np.where(d != 0, s.cost.k + np.asarray(s.cost.variable.value(d)), 0.0)
        return out

    def complete(head: np.ndarray) -> np.ndarray:
        last = (need - head @ mw[:-1]) / mw[-1]
        return np.concatenate([head, last[..., None]], axis=-1)

    if free == 0:
        ds = complete(np.zeros((1, 0)))[0]
        return HeteroOracleResult(ds, float(costs(ds)), P, grid_n)
    per_axis = max(2, int(round(min(grid_n, 4e6 ** (1.0 / free)))))
    axis = np.linspace(-span, span, per_axis)
    mesh = np.stack(np.meshgrid(*([axis] * free), indexing="ij"), axis=-1).reshape(-1, free)
    full = complete(mesh)
    total = costs(full)
    i = int(np.argmin(total))
    best = full[i]
    if free == 1:
        step = axis[1] - axis[0]
        f = lambda d: float(costs(complete(np.array([d]))))  # noqa: E731
        d = golden_section_min(f, best[0] - step, best[0] + step, tol=1e-12)
        if f(d) <= total[i]:
            best = complete(np.array([d]))
    achieved = float(np.dot(mw, means + best) / mw.sum())
    return HeteroOracleResult(best, float(costs(best)), achieved, per_axis)


# -- proposition checks ---------------------------------------------------

PROPOSITIONS = ("P2_mean", "P2_median", "P3", "P4", "P5", "P6_weighted", "P6_median")
PASS, FAIL, UNMET, INFEASIBLE = "pass", "fail", "hypotheses unmet", "infeasible"
DEFAULT_CURVE_TAUS = (0.0, 0.1, 0.2, 0.3, 0.4)


@dataclass(frozen=True)
class VerifyScenario:
    scenario_id: str
    cost: CostModel = CostModel()
    P: float = 1.0
    dist: D.Distribution = field(default_factory=D.Degenerate)
    population: object = None
    taus: Optional[tuple] = None
    tol: Optional[float] = None
    search: SearchConfig = SearchConfig()


@dataclass(frozen=True)
class VerifyReport:
    prop_id: str
    scenario_id: str
    closed_form_cost: float
    oracle_cost: float
    abs_gap: float
    symmetry_pass: Optional[bool]
    status: str
    tol: float = math.nan
    details: tuple = ()

    CSV_HEADER = (
        "prop_id", "scenario_id", "closed_form_cost", "oracle_cost", "abs_gap", "symmetry_pass", "status",
    )

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def csv_row(self) -> list[str]:
        sym = "na" if self.symmetry_pass is None else str(self.symmetry_pass).lower()
        return [
            self.prop_id, self.scenario_id, _fmt(self.closed_form_cost), _fmt(self.oracle_cost),
            _fmt(self.abs_gap), sym, self.status,
        ]

    def lines(self) -> list[str]:
        out = [
            f"[{self.status}] {self.prop_id} / {self.scenario_id}",
            f"  closed form cost: {_fmt(self.closed_form_cost)}",
            f"  oracle cost:      {_fmt(self.oracle_cost)}",
            f"  gap:              {_fmt(self.abs_gap)} (tol {self.tol:g})",
            f"  symmetry:         {'n/a' if self.symmetry_pass is None else self.symmetry_pass}",
        ]
        out += [f"  {k}: {_fmt(v) if isinstance(v, float) else v}" for k, v in self.details]
        return out


def _fmt(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.10g}"


def _unmet(prop: str, sc: VerifyScenario, why: str) -> VerifyReport:
    return VerifyReport(prop, sc.scenario_id, math.nan, math.nan, math.nan, None, UNMET, details=(("reason", why),))


def _report(prop, sc, closed, oracle, tol, sym, extra_ok=True, details=()) -> VerifyReport:
    if math.isnan(oracle):
        return VerifyReport(prop, sc.scenario_id, closed, oracle, math.nan, sym, INFEASIBLE, tol, tuple(details))
    gap = abs(closed - oracle)
    ok = gap <= tol and sym is not False and extra_ok
    return VerifyReport(prop, sc.scenario_id, closed, oracle, gap, sym, PASS if ok else FAIL, tol, tuple(details))


def _degenerate(sc: VerifyScenario) -> bool:
    return isinstance(sc.dist, D.Degenerate) and sc.dist.p == 0.0


def _verify_p2_mean(sc):
    m, P = sc.cost, sc.P
    if m.k != 0 or not m.strictly_convex:
        return _unmet("P2_mean", sc, "needs k = 0 and a strictly convex variable cost")
    if P == 0 or not D.is_symmetric(sc.dist, 0.0):
        return _unmet("P2_mean", sc, "needs P != 0 and prices symmetric about 0")
    plan = mean_attack(m, P, sc.dist)
    oracle = min_cost_attack(sc.dist, m, BenchmarkSpec.mean(), P, sc.search)
    cert = symmetry_certificate(plan.final_distribution(), P)
    return _report("P2_mean", sc, plan.cost, oracle.cost, sc.tol or 1e-3, cert.passed,
                   details=(("delta", plan.delta), ("mass", plan.mass), ("oracle_family", oracle.family)))


def _verify_p2_median(sc):
    m, P, F = sc.cost, sc.P, sc.dist
    if m.has_variable_cost or m.k <= 0:
        return _unmet("P2_median", sc, "needs zero variable cost and k > 0")
    try:
        plan = median_symmetric_construction(F, P, m.k)
    except ValueError as exc:
        return _unmet("P2_median", sc, str(exc))
    closed = median_attack_cost(m.k, F, P)
    oracle = min_cost_attack(F, m, BenchmarkSpec.median(), P, sc.search)
    density_gap = float(np.max(np.abs(plan.final.density - plan.g_tilde)))
    mass_gap = abs(plan.moved_mass - (D.cdf(F, P) - 0.5))
    cert = symmetry_certificate(plan.final, P)
    sym = plan.symmetric(1e-6) and cert.passed
    details = (
        ("moved_mass", plan.moved_mass), ("density_gap", density_gap),
        ("moved_mass_gap", mass_gap), ("oracle_moved_mass", oracle.moved_mass),
    )
    return _report("P2_median", sc, closed.cost, oracle.cost, sc.tol or 5e-4, sym,
                   density_gap <= 1e-6 and mass_gap <= 1e-6, details)


def _verify_p3(sc):
    m, P = sc.cost, sc.P
    if not _degenerate(sc) or not m.strictly_convex:
        return _unmet("P3", sc, "needs prices concentrated at 0 and a strictly convex variable cost")
    dm, a = delta_min(m), abs(P)
    if P == 0 or dm == INF or not (dm <= a or math.isclose(dm, 2 * a, rel_tol=1e-12)):
        return _unmet("P3", sc, f"delta_min = {dm:g} is neither <= |P| nor = 2|P|")
    plan = mean_attack(m, P)
    oracle = min_cost_attack(sc.dist, m, BenchmarkSpec.mean(), P, sc.search)
    cert = symmetry_certificate(plan.final_distribution(), P)
    return _report("P3", sc, plan.cost, oracle.cost, sc.tol or 1e-3, cert.passed,
                   details=(("delta", plan.delta), ("mass", plan.mass), ("delta_min", dm)))


def _verify_p4(sc):
    m, P = sc.cost, sc.P
    if not _degenerate(sc) or not m.strictly_convex or P <= 0:
        return _unmet("P4", sc, "needs prices concentrated at 0, P > 0 and a strictly convex variable cost")
    try:
        tau = optimal_tau(m, P)
    except HypothesisError as exc:
        return _unmet("P4", sc, str(exc))
    plan = trimmed_attack(m, tau, P)
    oracle = min_cost_attack(sc.dist, m, BenchmarkSpec.trimmed_mean(tau), P, sc.search)
    cert = symmetry_certificate(plan.final_distribution(), P)
    mean_cost = mean_attack(m, P).cost
    details = [("tau_star", tau), ("delta", plan.delta), ("mass", plan.mass), ("mean_cost", mean_cost)]
    ok = plan.cost > mean_cost
    if sc.taus:
        rows = tau_sweep(m, P, sc.taus, sc.search)
        peak = max(rows, key=lambda r: r[2])
        step = max(np.diff(sorted(sc.taus))) if len(sc.taus) > 1 else 0.0
        ok = ok and abs(peak[0] - tau) <= step and oracle.cost >= peak[2] - (sc.tol or 1e-3)
        details.append(("sweep_peak_tau", peak[0]))
    return _report("P4", sc, plan.cost, oracle.cost, sc.tol or 1e-3, cert.passed, ok, details)


def _verify_p5(sc):
    m, P = sc.cost, sc.P
    if not _degenerate(sc) or not m.strictly_convex or P <= 0:
        return _unmet("P5", sc, "needs prices concentrated at 0, P > 0 and a strictly convex variable cost")
    dm = delta_min(m)
    if not P < dm < 2 * P:
        return _unmet("P5", sc, f"delta_min = {dm:g} is not strictly between P and 2P")
    taus = sc.taus or DEFAULT_CURVE_TAUS
    rows = tau_sweep(m, P, taus, sc.search)
    closed = [r[1] for r in rows]
    gaps = [abs(r[1] - r[2]) if not math.isnan(r[2]) else math.inf for r in rows]
    decreasing = all(b < a for a, b in zip(closed, closed[1:]))
    rep = _report("P5", sc, closed[0], rows[0][2], sc.tol or 1e-3, None,
                  decreasing and max(gaps) <= (sc.tol or 1e-3),
                  (("strictly_decreasing", decreasing), ("max_gap", max(gaps)),
                   ("costs", " ".join(f"{c:.6g}" for c in closed))))
    return VerifyReport(rep.prop_id, rep.scenario_id, rep.closed_form_cost, rep.oracle_cost,
                        max(gaps), None, rep.status, rep.tol, rep.details)


def _verify_p6_weighted(sc):
    from .hetero import (
        doubly_symmetric_values, hetero_mean_attack, stationarity_residual, weighted_mean_weights,
    )

    pop, P = sc.population, sc.P
    if pop is None:
        return _unmet("P6_weighted", sc, "scenario has no population")
    try:
        w = weighted_mean_weights(pop, P)
        plan = hetero_mean_attack(pop, P)
    except (HypothesisError, ValueError) as exc:
        return _unmet("P6_weighted", sc, str(exc))
    oracle = hetero_grid_oracle(pop, w, P)
    resid = stationarity_residual(pop, P, plan.deltas)
    values = doubly_symmetric_values(plan.final, w)
    sym = plan.final.pooled_symmetric(P, 1e-6) and all(abs(v - P) <= 1e-6 for v in values.values())
    ok = resid <= 1e-9 and abs(plan.achieved - P) <= 1e-9
    details = (("weights", " ".join(f"{x:.6g}" for x in w)), ("stationarity", resid),
               ("achieved", plan.achieved), ("oracle_deltas", " ".join(f"{d:.6g}" for d in oracle.deltas)))
    return _report("P6_weighted", sc, plan.cost, oracle.cost, sc.tol or 1e-3, sym, ok, details)


def _verify_p6_median(sc):
    from .hetero import hetero_median_attack

    pop, P = sc.population, sc.P
    if pop is None:
        return _unmet("P6_median", sc, "scenario has no population")
    try:
        plan = hetero_median_attack(pop, P)
    except (HypothesisError, ValueError) as exc:
        return _unmet("P6_median", sc, str(exc))
    parts = [min_cost_attack(s.dist, s.cost, BenchmarkSpec.median(), P, sc.search) for s in pop.subpops]
    oracle = math.fsum(s.mu * p.cost for s, p in zip(pop.subpops, parts))
    return _report("P6_median", sc, plan.cost, oracle, sc.tol or 5e-4, plan.symmetric(1e-6),
                   details=(("per_subpopulation", " ".join(f"{c:.6g}" for c in plan.costs)),))


_VERIFIERS = {
    "P2_mean": _verify_p2_mean,
    "P2_median": _verify_p2_median,
    "P3": _verify_p3,
    "P4": _verify_p4,
    "P5": _verify_p5,
    "P6_weighted": _verify_p6_weighted,
    "P6_median": _verify_p6_median,
}


def verify_proposition(prop_id: str, scenario: VerifyScenario) -> VerifyReport:
    """Run the closed form and the oracle on ``scenario`` and compare them."""
    if prop_id not in _VERIFIERS:
        raise ValueError(f"unknown proposition {prop_id!r}; choose from {', '.join(PROPOSITIONS)}")
    return _VERIFIERS[prop_id](scenario)
