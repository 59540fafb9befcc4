"""Command-line entry point: ``sea-dynamics {simulate,analyze,lindblad-demo,oracle}``.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 I/O failure.
Relative output paths are resolved against ``$SEA_SEED_DIR`` when it is set.
Settings merge as CLI flags over ``--config`` JSON over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction

import numpy as np

from . import _kernels
from .boltzmann import SCENARIOS, ScenarioConfig, canonical_solve, run_scenario, scenario_policy, summarize
from .errors import InvalidPolicy, OutOfRange, SEAError, UnknownScenario
from .generator import GeneratorSet, TauPolicy, evaluate
from .operators import DensityState
from .output import (
    atomic_write,
    read_series,
    render_csv,
    render_json,
    residual_extremes,
    series_header,
    series_rows,
    to_jsonable,
)

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "fig1"
    tau: float = 1.0
    delta: float | None = None
    log_delta: float = ScenarioConfig.log_delta
    mix: float = ScenarioConfig.mix
    t_end: float = ScenarioConfig.t_end
    dt: float = ScenarioConfig.step
    sample_interval: float = ScenarioConfig.sample_interval
    method: str = ScenarioConfig.method
    rel_tol: float = ScenarioConfig.rel_tol
    format: str = "csv"
    out: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UnknownScenario(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidPolicy(f"tau must be positive, got {self.tau}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"unknown format {self.format!r}")
        if self.method not in ("rk45", "rk4"):
            raise UsageError(f"unknown method {self.method!r}")

    @property
    def policy(self) -> TauPolicy:
        return scenario_policy(self.scenario, self.tau)

    def scenario_config(self) -> ScenarioConfig:
        log_delta = math.log(self.delta) if self.delta is not None else self.log_delta
        if self.delta is not None and not (0 < self.delta < 0.01):
            raise OutOfRange(f"delta must lie in (0, 0.01), got {self.delta}")
        return ScenarioConfig(
            tau=self.tau, log_delta=log_delta, mix=self.mix, t_end=self.t_end, step=self.dt,
            sample_interval=self.sample_interval, method=self.method, rel_tol=self.rel_tol,
        )


def _resolve(path: str) -> str:
    root = os.environ.get("SEA_SEED_DIR")
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def parse_config(args: argparse.Namespace) -> RunConfig:
    """Merge CLI flags over an optional JSON config file over defaults."""
    merged: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                merged.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    names = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - names
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for name in names:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    return RunConfig(**merged)


def _add_run_flags(p):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--scenario", help="fig1 (constant tau) or fig3 (lower-bound tau)")
    p.add_argument("--tau", type=float, help="constant dissipation time for fig1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sea-dynamics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a scenario forward and backward")
    _add_run_flags(sim)
    sim.add_argument("--delta", type=float, help="initial occupation of level 3")
    sim.add_argument("--log-delta", type=float, dest="log_delta", help="natural log of the level-3 seed")
    sim.add_argument("--mix", type=float, help="weight of the two-level component in the initial state")
    sim.add_argument("--t-end", type=float, dest="t_end", help="integration horizon in each direction")
    sim.add_argument("--dt", type=float, help="initial (rk45) or fixed (rk4) step")
    sim.add_argument("--sample-interval", type=float, dest="sample_interval")
    sim.add_argument("--method", choices=("rk45", "rk4"))
    sim.add_argument("--rel-tol", type=float, dest="rel_tol")
    sim.add_argument("--format", choices=("csv", "json"))
    sim.add_argument("--out", help="series file; a .summary.json is written next to it")

    ana = sub.add_parser("analyze", help="recompute relation residuals from a stored series")
    _add_run_flags(ana)
    ana.add_argument("series", help="CSV or JSON series written by simulate")
    ana.add_argument("--out", help="summary JSON path (default: stdout)")

    lin = sub.add_parser("lindblad-demo", help="Pauli versus SEA cardinality comparison")
    lin.add_argument("--horizon", type=float, default=20.0)
    lin.add_argument("--tau", type=float, default=1.0)
    lin.add_argument("--out", help="side-by-side CSV path (default: stdout)")

    ora = sub.add_parser("oracle", help="canonical distribution for given levels and mean energy")
    ora.add_argument("--levels", default="0,1/3,2/3,1", help="comma-separated, fractions allowed")
    ora.add_argument("--mean", type=float, default=0.4)
    return parser


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(_resolve(out), text)


def cmd_simulate(args) -> int:
    cfg = parse_config(args)
    result = run_scenario(cfg.scenario, cfg.scenario_config())
    full = result.full
    unit = cfg.tau if cfg.policy.is_constant else 1.0
    header = series_header(4)
    rows = series_rows(full, cfg.policy, unit)
    text = render_csv(rows, header) if cfg.format == "csv" else render_json(rows, header)
    summary = summarize(result)
    summary["backend"] = _kernels.BACKEND
    summary["config"] = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    summary_text = json.dumps(to_jsonable(summary), indent=1) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
        sys.stderr.write(summary_text)
    else:
        path = _resolve(cfg.out)
        atomic_write(path, text)
        root, _ = os.path.splitext(path)
        atomic_write(root + ".summary.json", summary_text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .evolution import Sample
    from .uncertainty import inequality_suite, level_projectors

    cfg = parse_config(args)
    try:
        rows = read_series(args.series)
    except OSError as exc:
        raise UsageError(f"cannot read series {args.series}: {exc}") from exc
    if not rows:
        raise UsageError("empty series")
    n = sum(1 for k in rows[0] if k.startswith("p_"))
    gens = GeneratorSet.from_levels(np.linspace(0.0, 1.0, n) if n != 4 else (0, 1 / 3, 2 / 3, 1))
    obs = level_projectors(n)
    obs["H"] = gens.H
    samples = []
    for row in rows:
        p = np.array([row[f"p_{i + 1}"] for i in range(n)])
        st = DensityState.from_probabilities(p / p.sum())
        sea = evaluate(st, gens, cfg.policy)
        samples.append(Sample(row["t"], st, sea, inequality_suite(st, gens, cfg.policy, obs, sea=sea)))
    res, ids = residual_extremes(samples)
    out = {"scenario": cfg.scenario, "samples": len(samples), "min_residuals": res, "max_identity_deviations": ids}
    _emit(json.dumps(to_jsonable(out), indent=1) + "\n", getattr(args, "out", None))
    return EXIT_OK


def cmd_lindblad(args) -> int:
    from .lindblad import compare_cardinality

    if not (args.tau > 0 and args.horizon > 0):
        raise UsageError("tau and horizon must be positive")
    rep = compare_cardinality(horizon=args.horizon, tau0=args.tau)
    header = ["t", "pauli_p1", "pauli_p2", "pauli_exact_p2"] + [f"sea_p{i + 1}" for i in range(4)] + [
        f"sea_back_p{i + 1}" for i in range(4)
    ]
    rows = []
    for k, t in enumerate(rep.t):
        row = {"t": t, "pauli_p1": rep.pauli_forward[k, 0], "pauli_p2": rep.pauli_forward[k, 1],
               "pauli_exact_p2": rep.pauli_analytic_p2[k]}
        for i in range(4):
            row[f"sea_p{i + 1}"] = rep.sea_forward[k, i]
            row[f"sea_back_p{i + 1}"] = rep.sea_backward[k, i]
        rows.append(row)
    _emit(render_csv(rows, header), args.out)
    summary = {
        "pauli_max_error": rep.pauli_max_error,
        "pauli_p2_after_1e-6_tau": rep.pauli_first_order_p2,
        "pauli_backward_min": rep.pauli_backward_min,
        "pauli_backward_crossing_time": -rep.pauli_backward_crossing,
        "sea_max_zero_component": rep.sea_max_zero_component,
        "sea_near_pure_backward_min": rep.sea_near_pure_backward_min,
    }
    sys.stderr.write(json.dumps(to_jsonable(summary), indent=1) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        levels = [float(Fraction(x.strip())) for x in args.levels.split(",")]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad levels {args.levels!r}") from exc
    p, theta = canonical_solve(levels, args.mean)
    sys.stdout.write(json.dumps(to_jsonable({"levels": levels, "mean": args.mean, "p": p, "theta": theta})) + "\n")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "lindblad-demo": cmd_lindblad, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, UnknownScenario, InvalidPolicy, OutOfRange, TypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except SEAError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
