"""Command-line runner: ``benchmanip <command> SCENARIO [flags]``.

Every command writes one CSV (``--out``, the scenario's ``out`` key, or
stdout) with a single ``#`` metadata line, then a header row. Exit codes:
0 success, 2 configuration error, 3 infeasible target or unmet hypotheses,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import dist as D
from .attack import (
    HypothesisError,
    attack_cost_curve,
    mean_attack,
    median_attack_cost,
    median_symmetric_construction,
    trimmed_attack,
)
from .bench import (
    MEAN,
    MEDIAN,
    MEDIAN_OF_MEDIANS,
    MEAN_OF_MEDIANS,
    TRIMMED_MEAN,
    WEIGHTED_MEAN,
    BenchmarkSpec,
    evaluate,
    median,
)
from .config import ConfigError, Scenario, load_scenario
from .hetero import hetero_mean_attack, hetero_median_attack
from .oracle import PROPOSITIONS, FAIL, PASS, VerifyReport, VerifyScenario, verify_proposition

EXIT_OK, EXIT_CONFIG, EXIT_UNMET, EXIT_VERIFY = 0, 2, 3, 4

EVALUATE_HEADER = ("benchmark", "tau", "value")
ATTACK_HEADER = ("benchmark", "tau", "P", "delta", "Delta_mass", "cost", "achieved", "symmetric_final")
SWEEP_HEADER = ("P", "tau", "interior_root", "delta", "Delta_mass", "cost")
VERIFY_HEADER = VerifyReport.CSV_HEADER
COMPARE_HEADER = ("P", "rank", "benchmark", "tau", "cost")


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if v is None:
        return "na"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return str(v)


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "dev"


def write_csv(path: Optional[str], command: str, meta: dict, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# benchmanip {_version()} {command} " + " ".join(f"{k}={fmt(v)}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    text = buf.getvalue()
    if path and path != "-":
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def read_csv(path: str) -> tuple[str, list[str], list[dict]]:
    """Read a CSV written by this tool: (metadata line, header, rows as dicts)."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ConfigError(f"{path}: missing '#' metadata line")
    reader = csv.reader(lines[1:])
    try:
        header = next(reader)
    except StopIteration as exc:
        raise ConfigError(f"{path}: missing header row") from exc
    rows = [dict(zip(header, r)) for r in reader]
    return lines[0], header, rows


def _bind(spec: BenchmarkSpec, P: float) -> BenchmarkSpec:
    """Weighted means without explicit weights take marginal-cost weights at ``P``."""
    if spec.kind == WEIGHTED_MEAN and spec.weights is None:
        return BenchmarkSpec.weighted_mean(price=P)
    return spec


def _tau(spec: BenchmarkSpec):
    return spec.tau if spec.kind == TRIMMED_MEAN else None


def cmd_evaluate(sc: Scenario, args) -> tuple[int, list]:
    rows = []
    for spec in sc.benchmarks:
        spec = _bind(spec, sc.targets[0])
        if spec.for_population:
            if sc.population is None:
                raise ConfigError(f"{spec.label} needs 'subpops'")
            value = evaluate(spec, sc.population)
        else:
            target = sc.population.pooled(args.grid_n) if sc.population is not None else sc.dist
            value = evaluate(spec, target)
        rows.append((spec.label, _tau(spec), value))
    return EXIT_OK, rows


def _single_attack(sc: Scenario, spec: BenchmarkSpec, P: float, grid_n: int) -> tuple:
    """(delta, mass, cost, achieved, symmetric_final) for one closed-form plan."""
    if sc.population is not None:
        raise ConfigError(f"{spec.label} attacks need a single 'dist'; this scenario defines 'subpops'")
    m = sc.cost
    if spec.kind == MEAN or (spec.kind == TRIMMED_MEAN and spec.tau == 0):
        plan = mean_attack(m, P, sc.dist)
        if not plan.attained:
            return (plan.delta, plan.mass, plan.cost, math.nan, False)
        return (plan.delta, plan.mass, plan.cost, plan.achieved, plan.symmetric_final())
    if spec.kind == TRIMMED_MEAN:
        if not (isinstance(sc.dist, D.Degenerate) and sc.dist.p == 0):
            raise HypothesisError("trimmed-mean closed form needs prices concentrated at 0", "dispersed input")
        plan = trimmed_attack(m, spec.tau, P)
        return (plan.delta, plan.mass, plan.cost, plan.achieved, plan.symmetric_final())
    if spec.kind == MEDIAN:
        if m.has_variable_cost:
            raise HypothesisError("median closed form needs zero variable cost", "variable costs")
        if P < 0:
            raise HypothesisError("median construction is stated for P > 0; mirror the scenario", "negative target")
        plan = median_symmetric_construction(sc.dist, P, m.k, grid_n)
        cost = median_attack_cost(m.k, sc.dist, P)
        return (math.nan, cost.moved_mass, cost.cost, evaluate(spec, plan.final), plan.symmetric())
    raise ConfigError(f"no closed form for {spec.kind}")


def _population_attack(sc: Scenario, spec: BenchmarkSpec, P: float, grid_n: int) -> tuple:
    pop = sc.population
    if pop is None:
        raise ConfigError(f"{spec.label} needs 'subpops'")
    if spec.kind == WEIGHTED_MEAN:
        plan = hetero_mean_attack(pop, P)
        sym = plan.final.pooled_symmetric(P, 1e-6)
        return (P, 1.0, plan.cost, plan.achieved, sym)
    if spec.kind in (MEDIAN_OF_MEDIANS, MEAN_OF_MEDIANS):
        plan = hetero_median_attack(pop, P, grid_n)
        moved = math.fsum(s.mu * p.moved_mass for s, p in zip(pop.subpops, plan.plans))
        medians = np.array([median(p.final) for p in plan.plans])
        if spec.kind == MEDIAN_OF_MEDIANS:
            achieved = float(np.median(medians))
        elif spec.mass_weighted:
            achieved = float(np.dot(pop.masses, medians))
        else:
            achieved = float(np.mean(medians))
        return (math.nan, moved, plan.cost, achieved, plan.symmetric())
    raise ConfigError(f"no closed form for {spec.kind}")


def _attack_rows(sc: Scenario, grid_n: int) -> tuple[int, list]:
    code, rows = EXIT_OK, []
    for P in sc.targets:
        for spec in sc.benchmarks:
            spec = _bind(spec, P)
            try:
                fn = _population_attack if spec.for_population else _single_attack
                delta, mass, cost, achieved, sym = fn(sc, spec, P, grid_n)
                if math.isnan(achieved) and not math.isnan(cost):
                    code = EXIT_UNMET
            except HypothesisError as exc:
                print(f"{spec.label} at P={P:g}: {exc}", file=sys.stderr)
                delta = mass = cost = achieved = math.nan
                sym, code = False, EXIT_UNMET
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                print(f"{spec.label} at P={P:g}: {exc}", file=sys.stderr)
                delta = mass = cost = achieved = math.nan
                sym, code = False, EXIT_UNMET
            rows.append((spec.label, _tau(spec), P, delta, mass, cost, achieved, sym))
    return code, rows


def cmd_attack(sc: Scenario, args) -> tuple[int, list]:
    return _attack_rows(sc, args.grid_n)


def cmd_sweep(sc: Scenario, args) -> tuple[int, list]:
    if not (isinstance(sc.dist, D.Degenerate) and sc.dist.p == 0):
        raise ConfigError("sweep-tau needs dist = {family = \"degenerate\", p = 0}")
    if not sc.taus:
        raise ConfigError("sweep-tau needs a 'taus' list")
    rows = []
    for P in sc.targets:
        for r in attack_cost_curve(sc.cost, P, sc.taus, threads=args.threads):
            rows.append((P, r.tau, r.interior_root, r.delta, r.mass, r.cost))
    return EXIT_OK, rows


def cmd_verify(sc: Scenario, args) -> tuple[int, list]:
    props = [args.prop] if args.prop else list(sc.props)
    if not props:
        raise ConfigError("verify needs --prop or a 'props' list in the scenario")
    search = dataclasses.replace(sc.search, threads=args.threads)
    if args.grid_n_set:
        search = dataclasses.replace(search, n_atoms=args.grid_n)
    tol = args.tol if args.tol is not None else sc.tol
    rows, statuses = [], []
    for prop in props:
        for P in sc.targets:
            vs = VerifyScenario(
                f"{sc.scenario_id}@P={P:g}", sc.cost, P, sc.dist, sc.population, sc.taus, tol, search,
            )
            report = verify_proposition(prop, vs)
            print("\n".join(report.lines()), file=sys.stderr)
            rows.append(report.csv_row())
            statuses.append(report.status)
    if FAIL in statuses:
        return EXIT_VERIFY, rows
    if any(s != PASS for s in statuses):
        return EXIT_UNMET, rows
    return EXIT_OK, rows


def _rank(entries: list[tuple]) -> list[tuple]:
    """``entries`` are (P, label, tau, cost); rank benchmarks by cost, most expensive first."""
    rows = []
    for P in sorted({e[0] for e in entries}):
        here = [e for e in entries if e[0] == P]
        here.sort(key=lambda e: (math.isnan(e[3]), -e[3] if not math.isnan(e[3]) else 0.0, e[1]))
        rows += [(P, i + 1, label, tau, cost) for i, (_, label, tau, cost) in enumerate(here)]
    return rows


def _num(text: str) -> float:
    return math.nan if text in ("nan", "na", "") else float(text)


def cmd_compare(sc: Optional[Scenario], args) -> tuple[int, list]:
    if args.from_csv:
        _, header, rows = read_csv(args.from_csv)
        missing = {"benchmark", "P", "cost"} - set(header)
        if missing:
            raise ConfigError(f"{args.from_csv}: cannot rank, missing columns {sorted(missing)}")
        entries = [(_num(r["P"]), r["benchmark"], r.get("tau", "na"), _num(r["cost"])) for r in rows]
        return EXIT_OK, _rank(entries)
    code, rows = _attack_rows(sc, args.grid_n)
    entries = [(r[2], r[0], r[1], r[5]) for r in rows]
    return code, _rank(entries)


COMMANDS = {
    "evaluate": (cmd_evaluate, EVALUATE_HEADER),
    "attack": (cmd_attack, ATTACK_HEADER),
    "sweep-tau": (cmd_sweep, SWEEP_HEADER),
    "verify": (cmd_verify, VERIFY_HEADER),
    "compare": (cmd_compare, COMPARE_HEADER),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="benchmanip", description="Benchmark manipulation costs and checks.")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True
    helps = {
        "evaluate": "benchmark values on the unmanipulated input",
        "attack": "closed-form cheapest attack per benchmark and target",
        "sweep-tau": "attack cost across trimming quantiles",
        "verify": "closed form against the brute-force oracle",
        "compare": "rank benchmarks by attack cost per target",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", nargs="?" if name == "compare" else None, help="TOML scenario file")
        p.add_argument("--grid-n", type=int, default=None, help="discretization size (grid cells / oracle atoms)")
        p.add_argument("--tol", type=float, default=None, help="verification tolerance override")
        p.add_argument("--out", default=None, help="CSV output path ('-' for stdout)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized probes (recorded only)")
        p.add_argument("--threads", type=int, default=1, help="cap on worker threads")
        if name == "verify":
            p.add_argument("--prop", choices=PROPOSITIONS, default=None)
        if name == "compare":
            p.add_argument("--from-csv", default=None, help="rank the rows of an existing attack CSV")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    args.grid_n_set = args.grid_n is not None
    if args.grid_n is None:
        args.grid_n = D.DEFAULT_GRID_N
    fn, header = COMMANDS[args.command]
    try:
        if args.grid_n < 2 or args.threads < 1:
            raise ConfigError("--grid-n must be >= 2 and --threads >= 1")
        if args.command == "compare" and args.from_csv:
            sc = None
        elif args.scenario is None:
            raise ConfigError(f"{args.command} needs a scenario file")
        else:
            sc = load_scenario(args.scenario)
        code, rows = fn(sc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    meta = {
        "scenario": sc.scenario_id if sc else Path(args.from_csv).name,
        "grid_n": args.grid_n,
        "tol": args.tol,
        "seed": args.seed,
    }
    out = args.out if args.out is not None else (sc.out if sc else None)
    write_csv(out, args.command, meta, header, rows)
    return code


if __name__ == "__main__":
    sys.exit(main())
