"""Command-line front end: simulate, ode, sweep, theory, iso, scenario, compare.

Every subcommand reads an optional flat key=value config file, applies
--set overrides and per-key flags (dash-for-dot: --schedule-beta-i sets
schedule.beta_i), writes CSV to --out, and exits 0 on success, 2 on usage
errors, 1 on runtime failures.  --json-summary prints one structured line
to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, List, Optional

import numpy as np

from .forces import ForceParams
from .harness import (
    ISO_HEADER,
    SCENARIOS,
    SweepConfig,
    apply_overrides,
    compare_ode_sgd,
    config_to_train,
    parse_config_file,
    run_sweep,
    scenario_suite,
    _CONFIG_KEYS,
)
from .mixture import SummaryStats
from .ode import OdeConfig, integrate, sample_initial_stats
from .theory import (
    NoSolutionError,
    TheoryParams,
    closed_form_I,
    collapse_probability,
    iso_probability_beta,
)
from .trainer import run_annealed_sgd

__all__ = ["main", "entrypoint"]


class UsageError(Exception):
    pass


def _flag_name(key: str) -> str:
    return "--" + key.replace(".", "-").replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="config override (repeatable)",
    )
    for key in _CONFIG_KEYS:
        # dedicated typed flags cover these two on the subcommands that use them
        if key in ("seed", "workers"):
            continue
        p.add_argument(_flag_name(key), dest=f"cfg::{key}", default=None)


def _collect_values(args: argparse.Namespace) -> Dict:
    values: Dict = {}
    if args.config:
        try:
            values = parse_config_file(args.config)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except ValueError as exc:
            raise UsageError(str(exc))
    try:
        values = apply_overrides(values, args.set)
        flag_overrides = [
            f"{key.split('::', 1)[1]}={val}"
            for key, val in vars(args).items()
            if key.startswith("cfg::") and val is not None
        ]
        values = apply_overrides(values, flag_overrides)
    except ValueError as exc:
        raise UsageError(str(exc))
    return values


def _theory_from_values(values: Dict) -> TheoryParams:
    return TheoryParams(
        d=values.get("d", 512),
        R=values.get("R", 3.0),
        w_star=values.get("w_star", 0.8),
        alpha=values.get("alpha", 0.608),
    )


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit_summary(args: argparse.Namespace, payload: Dict) -> None:
    if args.json_summary:
        print(json.dumps(payload, sort_keys=True))


def _cmd_simulate(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    cfg = config_to_train(values)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    trace = run_annealed_sgd(cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    _emit_summary(
        args,
        {
            "command": "simulate",
            "classification": trace.collapsed,
            "m1": trace.m1[-1],
            "m2": trace.m2[-1],
            "s": trace.s[-1],
        },
    )
    return 0


def _cmd_ode(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    cfg = config_to_train(values)
    seed = args.seed if args.seed is not None else cfg.seed
    rng = np.random.default_rng(seed)
    init = sample_initial_stats(cfg.d, cfg.R, rng)
    if args.m1 is not None or args.m2 is not None or args.s is not None:
        if None in (args.m1, args.m2, args.s):
            raise UsageError("--m1/--m2/--s must be given together")
        init = SummaryStats(args.m1, args.m2, args.s)
    t_end = args.t_end if args.t_end is not None else cfg.schedule.t0 + 25.0
    ode_cfg = OdeConfig(
        params=ForceParams(R=cfg.R, w1=cfg.w1, w_star=cfg.w_star),
        schedule=cfg.schedule,
        t_end=t_end,
        dt=args.dt,
        reparameterized=not args.no_reparam,
    )
    tr = integrate(init, ode_cfg)
    lines = ["t,beta,m1,m2,s"]
    for i in range(len(tr.t)):
        lines.append(
            f"{tr.t[i]:.17g},{tr.beta[i]:.17g},{tr.m1[i]:.17g},"
            f"{tr.m2[i]:.17g},{tr.s[i]:.17g}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    _emit_summary(
        args,
        {
            "command": "ode",
            "m1": tr.m1[-1],
            "m2": tr.m2[-1],
            "s": tr.s[-1],
        },
    )
    return 0


def _parse_grid(raw: str) -> List[float]:
    try:
        vals = [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid {raw!r}: expected comma-separated floats")
    if not vals:
        raise UsageError("grid must be nonempty")
    return vals


def _cmd_sweep(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    base = config_to_train(values)
    theory = _theory_from_values(values)
    beta_grid = (
        _parse_grid(args.beta_i_grid)
        if args.beta_i_grid
        else list(np.exp(np.linspace(np.log(1e-4), np.log(theory.beta_transition), 5)))
    )
    t0_grid = _parse_grid(args.t0_grid) if args.t0_grid else [50.0, 150.0, 500.0, 1500.0]
    sweep = SweepConfig(
        base=base,
        beta_i_grid=beta_grid,
        t0_grid=t0_grid,
        n_replicates=args.replicates,
        engine=args.engine,
        theory=theory,
        base_seed=args.seed if args.seed is not None else values.get("seed", 0),
        workers=args.workers if args.workers is not None else values.get("workers", 1),
    )
    result = run_sweep(sweep)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        result.write_csv(fh)
    p_vals = [r.p_empirical for r in result.rows]
    _emit_summary(
        args,
        {
            "command": "sweep",
            "cells": len(result.rows),
            "p_min": min(p_vals),
            "p_max": max(p_vals),
        },
    )
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    theory = _theory_from_values(values)
    beta_grid = _parse_grid(args.beta_i_grid) if args.beta_i_grid else None
    t0_grid = _parse_grid(args.t0_grid) if args.t0_grid else None
    beta_i = args.beta_i if args.beta_i is not None else values.get("schedule.beta_i")
    t0 = args.t0 if args.t0 is not None else values.get("schedule.t0")
    rows = []
    if beta_grid and t0_grid:
        pairs = [(b, t) for b in beta_grid for t in t0_grid]
    elif beta_i is not None and t0 is not None:
        pairs = [(float(beta_i), float(t0))]
    else:
        raise UsageError("theory needs --beta-i/--t0 or --beta-i-grid/--t0-grid")
    for b, t in pairs:
        I = closed_form_I(b, t, theory) if b < 1.0 else 0.0
        rows.append((b, t, I, collapse_probability(I, theory)))
    lines = ["beta_i,t0,I,p_theory"] + [
        f"{b:.17g},{t:.17g},{I:.17g},{p:.17g}" for b, t, I, p in rows
    ]
    if args.out:
        _write_text(args.out, "\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    _emit_summary(
        args,
        {"command": "theory", "I": rows[0][2], "p_theory": rows[0][3]},
    )
    return 0


def _cmd_iso(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    theory = _theory_from_values(values)
    t0_grid = _parse_grid(args.t0_grid) if args.t0_grid else [50.0, 150.0, 500.0, 1500.0]
    lines = [ISO_HEADER]
    found = []
    for t0 in t0_grid:
        try:
            b = iso_probability_beta(t0, args.level, theory)
        except NoSolutionError:
            b = float("nan")
        found.append(b)
        lines.append(f"{t0:.17g},{b:.17g},{args.level:.17g}")
    _write_text(args.out, "\n".join(lines) + "\n")
    _emit_summary(args, {"command": "iso", "levels": len(found)})
    return 0


def _cmd_scenario(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 1
    trace = scenario_suite(args.name, seed=seed)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    _emit_summary(
        args,
        {
            "command": "scenario",
            "name": args.name,
            "classification": trace.collapsed,
            "sigma1": trace.sigma1[-1],
            "sigma2": trace.sigma2[-1],
        },
    )
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    cfg = config_to_train(values)
    report = compare_ode_sgd(cfg, seed=args.seed)
    sgd = report["sgd"]
    lines = ["step,tau,beta,m1_sgd,m2_sgd,s_sgd,m1_ode,m2_ode,s_ode"]
    taus = sgd.step * cfg.eta
    m1o = np.interp(taus, report["ode_t"], report["ode_m1"])
    m2o = np.interp(taus, report["ode_t"], report["ode_m2"])
    so = np.interp(taus, report["ode_t"], report["ode_s"])
    for i in range(len(sgd.step)):
        lines.append(
            f"{int(sgd.step[i])},{taus[i]:.17g},{sgd.beta[i]:.17g},"
            f"{sgd.m1[i]:.17g},{sgd.m2[i]:.17g},{sgd.s[i]:.17g},"
            f"{m1o[i]:.17g},{m2o[i]:.17g},{so[i]:.17g}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    _emit_summary(
        args,
        {
            "command": "compare",
            "sup_m1": report["sup_m1"],
            "sup_m2": report["sup_m2"],
            "sup_s": report["sup_s"],
        },
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annealvi",
        description="Annealed VI on bimodal Gaussian mixtures: trainer, ODE, theory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
        _add_config_flags(p)
        p.add_argument("--out", required=out_required, help="output CSV path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--json-summary", action="store_true")

    p = sub.add_parser("simulate", help="one annealed SGD run -> trace CSV")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ode", help="integrate the summary ODE -> trace CSV")
    common(p)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--no-reparam", action="store_true")
    p.add_argument("--m1", type=float, default=None)
    p.add_argument("--m2", type=float, default=None)
    p.add_argument("--s", type=float, default=None)
    p.set_defaults(func=_cmd_ode)

    p = sub.add_parser("sweep", help="(beta_i, t0) collapse-probability sweep")
    common(p)
    p.add_argument("--beta-i-grid", default=None, help="comma-separated beta_i values")
    p.add_argument("--t0-grid", default=None, help="comma-separated t0 values")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--engine", choices=("sgd", "ode"), default="ode")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("theory", help="closed-form exposure and collapse probability")
    common(p, out_required=False)
    p.add_argument("--beta-i", type=float, default=None)
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--beta-i-grid", default=None)
    p.add_argument("--t0-grid", default=None)
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("iso", help="iso-probability line beta_i(t0)")
    common(p)
    p.add_argument("--level", type=float, default=0.5)
    p.add_argument("--t0-grid", default=None)
    p.set_defaults(func=_cmd_iso)

    p = sub.add_parser("scenario", help="run a named figure protocol")
    p.add_argument("name", choices=SCENARIOS)
    common(p)
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("compare", help="ODE vs SGD trajectory deviation report")
    common(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # pragma: no cover - console script shim
    sys.exit(main())
