"""Scenario files (TOML) and their validation.

Schema, all keys optional unless marked::

    id = "k8-quadratic"                       # defaults to the file stem
    targets = [1.0, 2.0]                      # required, non-empty
    benchmarks = ["mean", "median", {kind = "trimmed_mean", tau = 0.1}]   # required
    taus = [0.0, 0.1, 0.2]                    # for sweep-tau and the P4/P5 checks
    props = ["P4"]                            # for verify
    out = "results.csv"
    tol = 1e-3                                # verification tolerance override

    dist = {family = "degenerate", p = 0.0}   # or a [[subpops]] list
    cost = {k = 8.0, variable = "quadratic", a = 1.0}

    [oracle]                                  # SearchConfig overrides
    n_atoms = 2000

    [[subpops]]
    mu = 0.5
    dist = {family = "triangular", center = 0.0, halfwidth = 1.0}
    cost = {k = 0.0, variable = "quadratic", a = 2.0}

Distribution families: ``degenerate`` (p), ``uniform`` (a, b), ``triangular``
(center, halfwidth), ``truncated_gaussian`` (sigma, halfwidth, center) and
``atoms`` (positions, masses). Variable costs: ``zero``, ``quadratic`` (a),
``power`` (a, p) and ``table`` (knots as ``[[q, c], ...]``).
Benchmark strings: ``mean``, ``median``, ``trimmed_mean:<tau>``,
``weighted_mean`` (marginal-cost weights at each target),
``median_of_medians``, ``mean_of_medians`` and ``mean_of_medians:mass``.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dist as D
from .bench import BenchmarkSpec
from .cost import ConvexTable, CostModel, Power, Quadratic, ZeroCost
from .hetero import Population, Subpopulation
from .oracle import PROPOSITIONS, SearchConfig


class ConfigError(ValueError):
    """Scenario file cannot be read or does not match the schema."""


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    benchmarks: tuple
    targets: tuple
    dist: D.Distribution = field(default_factory=D.Degenerate)
    cost: CostModel = CostModel()
    population: Optional[Population] = None
    taus: Optional[tuple] = None
    props: tuple = ()
    search: SearchConfig = SearchConfig()
    tol: Optional[float] = None
    out: Optional[str] = None

    def __post_init__(self):
        if not self.benchmarks:
            raise ConfigError("scenario needs at least one benchmark")
        if not self.targets:
            raise ConfigError("scenario needs at least one target price")


def _num(table: dict, key: str, where: str, default: Any = None) -> float:
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}: missing '{key}'")
        return float(default)
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: '{key}' must be a number, got {value!r}")
    return float(value)


def _table(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a table")
    return value


def parse_dist(raw: Any, where: str = "dist") -> D.Distribution:
    t = _table(raw, where)
    family = t.get("family")
    if family == "degenerate":
        return D.Degenerate(_num(t, "p", where, 0.0))
    if family == "uniform":
        return D.Uniform(_num(t, "a", where), _num(t, "b", where))
    if family == "triangular":
        return D.Triangular(_num(t, "center", where, 0.0), _num(t, "halfwidth", where))
    if family == "truncated_gaussian":
        return D.TruncatedGaussian(_num(t, "sigma", where), _num(t, "halfwidth", where), _num(t, "center", where, 0.0))
    if family == "atoms":
        pos, mass = t.get("positions"), t.get("masses")
        if not isinstance(pos, list) or not pos:
            raise ConfigError(f"{where}: 'positions' must be a non-empty list")
        if mass is None:
            return D.AtomDist.equal_mass(pos)
        return D.AtomDist(pos, mass)
    raise ConfigError(f"{where}: unknown family {family!r}")


def parse_cost(raw: Any, where: str = "cost") -> CostModel:
    t = _table(raw, where)
    k = _num(t, "k", where, 0.0)
    kind = t.get("variable", "quadratic")
    if kind == "zero":
        variable = ZeroCost()
    elif kind == "quadratic":
        variable = Quadratic(_num(t, "a", where, 1.0))
    elif kind == "power":
        variable = Power(_num(t, "a", where, 1.0), _num(t, "p", where))
    elif kind == "table":
        knots = t.get("knots")
        if not isinstance(knots, list) or not all(isinstance(x, list) and len(x) == 2 for x in knots):
            raise ConfigError(f"{where}: 'knots' must be a list of [q, c] pairs")
        variable = ConvexTable(tuple(tuple(x) for x in knots))
    else:
        raise ConfigError(f"{where}: unknown variable cost {kind!r}")
    return CostModel(k, variable)


def parse_benchmark(raw: Any, where: str = "benchmarks") -> BenchmarkSpec:
    if isinstance(raw, dict):
        kind = raw.get("kind")
        if kind == "trimmed_mean":
            return BenchmarkSpec.trimmed_mean(_num(raw, "tau", where))
        if kind == "weighted_mean":
            w = raw.get("weights")
            return BenchmarkSpec.weighted_mean(w, None if w is not None else raw.get("price"))
        if kind == "mean_of_medians":
            return BenchmarkSpec.mean_of_medians(bool(raw.get("mass_weighted", False)))
        raw = kind
    if not isinstance(raw, str):
        raise ConfigError(f"{where}: benchmark must be a string or table, got {raw!r}")
    name, _, arg = raw.partition(":")
    if name == "trimmed_mean":
        try:
            return BenchmarkSpec.trimmed_mean(float(arg))
        except ValueError as exc:
            raise ConfigError(f"{where}: bad trimming quantile in {raw!r}") from exc
    if name == "mean_of_medians":
        return BenchmarkSpec.mean_of_medians(arg == "mass")
    if name == "weighted_mean":
        # weights fixed per target by the caller
        return BenchmarkSpec.weighted_mean(price=0.0)
    if name in ("mean", "median", "median_of_medians") and not arg:
        return BenchmarkSpec(name)
    raise ConfigError(f"{where}: unknown benchmark {raw!r}")


def _float_list(raw: Any, where: str) -> tuple:
    if not isinstance(raw, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in raw):
        raise ConfigError(f"'{where}' must be a list of numbers")
    return tuple(float(x) for x in raw)


def parse_search(raw: Any) -> SearchConfig:
    t = _table(raw, "oracle")
    names = {f.name for f in dataclasses.fields(SearchConfig)}
    unknown = set(t) - names
    if unknown:
        raise ConfigError(f"oracle: unknown keys {sorted(unknown)}")
    return SearchConfig(**t)


def parse_scenario(data: dict, default_id: str = "scenario") -> Scenario:
    """Build a :class:`Scenario` from an already-decoded key-value tree."""
    known = {"id", "targets", "benchmarks", "taus", "props", "out", "tol", "dist", "cost", "oracle", "subpops"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    try:
        benchmarks = data.get("benchmarks")
        if not isinstance(benchmarks, list):
            raise ConfigError("'benchmarks' must be a list")
        specs = tuple(parse_benchmark(b) for b in benchmarks)
        targets = _float_list(data.get("targets"), "targets")
        taus = _float_list(data["taus"], "taus") if "taus" in data else None
        props = tuple(data.get("props", ()))
        bad = [p for p in props if p not in PROPOSITIONS]
        if bad:
            raise ConfigError(f"unknown propositions {bad}; choose from {', '.join(PROPOSITIONS)}")
        dist = parse_dist(data["dist"]) if "dist" in data else D.Degenerate(0.0)
        cost = parse_cost(data["cost"]) if "cost" in data else CostModel()
        population = None
        if "subpops" in data:
            rows = data["subpops"]
            if not isinstance(rows, list) or not rows:
                raise ConfigError("'subpops' must be a non-empty list of tables")
            subs = []
            for i, row in enumerate(rows):
                row = _table(row, f"subpops[{i}]")
                subs.append(Subpopulation(
                    _num(row, "mu", f"subpops[{i}]"),
                    parse_dist(row.get("dist"), f"subpops[{i}].dist"),
                    parse_cost(row.get("cost", {}), f"subpops[{i}].cost"),
                ))
            population = Population(tuple(subs))
        search = parse_search(data["oracle"]) if "oracle" in data else SearchConfig()
        tol = _num(data, "tol", "scenario") if "tol" in data else None
        return Scenario(
            str(data.get("id", default_id)), specs, targets, dist, cost, population,
            taus, props, search, tol, data.get("out"),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror or exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid TOML: {exc}") from exc
    return parse_scenario(data, path.stem)
