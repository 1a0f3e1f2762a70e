"""Command-line entry point.

Subcommands: validate, solve, fbf, hsdm, sweep, compare, oracle-check.
Exit codes: 0 success, 1 validation failure, 2 solver/configuration error.
All numerics go to CSV files; stdout carries a one-line summary.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .baselines import HsdmParams, fbf_solve, hsdm_fbf_solve
from .game import (
    ValidationError,
    load_game,
    selection_value,
    validate_game,
)
from .precond import ConfigurationError
from .qp_oracle import (
    OracleError,
    check_potential_game_selection,
    check_zero_pseudogradient_selection,
)
from .tikhonov import InnerLoopError, ScheduleParams, solve

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gneselect",
        description="Optimal generalized Nash equilibrium selection in monotone games.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, budget_default=20000):
        sp.add_argument("--config", type=Path, help="game JSON (agents, b, Q_F, c_F, Q_phi, ...)")
        sp.add_argument("--seed", type=int, help="generate a benchmark instance with this seed")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--budget", type=int, default=budget_default,
                        help="cumulative inner-iteration budget")
        sp.add_argument("--stride", type=int, default=1, help="trace row stride")

    sp = sub.add_parser("validate", help="check the standing assumptions of a game file")
    sp.add_argument("--config", type=Path, required=True)

    sp = sub.add_parser("solve", help="run the double-layer Tikhonov-pFB selection solver")
    add_common(sp)
    sp.add_argument("--xi", type=float, default=0.6)
    sp.add_argument("--zeta", type=float, default=2.0)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--gamma0", type=float, default=1e-3)
    sp.add_argument("--max-outer", type=int, default=10**9)
    sp.add_argument("--stop-rule", choices=("paper", "conservative"), default="conservative")

    sp = sub.add_parser("fbf", help="run the plain FBF baseline (no selection)")
    add_common(sp)
    sp.add_argument("--tol", type=float, default=1e-6)

    sp = sub.add_parser("hsdm", help="run the HSDM-FBF selection baseline")
    add_common(sp)
    sp.add_argument("--gamma0", type=float, default=1e-3)
    sp.add_argument("--eta", type=float, default=0.6)

    sp = sub.add_parser("sweep", help="run a parameter sweep of the benchmark harness")
    sp.add_argument("--config", type=Path, help="experiment JSON (ExperimentConfig)")
    sp.add_argument("--sweep", choices=bench.SWEEPS, required=True)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--budget", type=int)

    sp = sub.add_parser("compare", help="run the Tikhonov-pFB vs HSDM-FBF comparison")
    sp.add_argument("--config", type=Path)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--budget", type=int)

    sp = sub.add_parser("oracle-check", help="cross-check the solver against the QP oracle")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scenario", choices=("zero", "potential"), default="zero")
    return p


def _load_instance(args):
    if args.config is not None:
        game, sel = load_game(args.config)
        if sel is None:
            raise ValidationError("game file carries no selection function block")
        return game, sel
    if args.seed is not None:
        cfg = bench.ExperimentConfig(n_instances=1, seed=args.seed)
        return bench.generate_instance(args.seed, cfg)
    raise ValidationError("provide --config or --seed")


def _cmd_validate(args) -> int:
    game, _ = load_game(args.config)
    report = validate_game(game)
    for check in report.checks:
        line = f"{check.name}: {check.status}"
        if check.detail:
            line += f" ({check.detail})"
        print(line)
    if not report.ok:
        for check in report.failures():
            print(f"{check.name} check failed")
        return EXIT_VALIDATION
    print("all checks passed")
    return EXIT_OK


def _cmd_solve(args) -> int:
    from .precond import make_config
    from .tikhonov import gamma_schedule

    game, sel = _load_instance(args)
    params = ScheduleParams(gamma0=args.gamma0, xi=args.xi, zeta=args.zeta,
                            max_outer=args.max_outer)
    cfg = make_config(game, sel, alpha=args.alpha, gamma_bar=gamma_schedule(params, 1))
    result = solve(
        game, sel, params,
        cfg=cfg,
        stop_rule=args.stop_rule,
        budget=args.budget,
        trace_stride=args.stride,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "solve_trace.csv"
    header = {
        "method": bench.METHOD_TIK, "xi": args.xi, "zeta": args.zeta,
        "alpha": args.alpha, "gamma0": args.gamma0, "budget": args.budget,
        "stop_rule": args.stop_rule, "stride": args.stride, "rng": bench.RNG_NAME,
        "dstep_norm": "phi",
    }
    header.update(cfg.header_dict())
    result.trace.to_csv(path, header)
    print(
        f"residual={result.final_residual:.6e} phi={result.final_phi:.6e} "
        f"inner_iterations={result.cumulative_inner} outer={result.outer_iterations} "
        f"trace={path}"
    )
    return EXIT_OK


def _cmd_fbf(args) -> int:
    game, sel = _load_instance(args)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = fbf_solve(game, tol=args.tol, max_iter=args.budget,
                           selection=sel, trace_stride=args.stride)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "fbf_trace.csv"
    result.trace.to_csv(path, {"method": "fbf", "tol": args.tol, "budget": args.budget,
                               "rng": bench.RNG_NAME, "fbf_step": result.step,
                               "bc_lipschitz": result.lipschitz,
                               "dstep_norm": "euclidean"})
    phi = selection_value(sel, result.omega)
    print(
        f"residual={result.final_residual:.6e} phi={phi:.6e} "
        f"inner_iterations={result.iterations} converged={result.converged} trace={path}"
    )
    return EXIT_OK


def _cmd_hsdm(args) -> int:
    game, sel = _load_instance(args)
    params = HsdmParams(gamma0=args.gamma0, eta=args.eta, max_iter=args.budget)
    result = hsdm_fbf_solve(game, sel, params, trace_stride=args.stride)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "hsdm_trace.csv"
    result.trace.to_csv(path, {"method": bench.METHOD_HSDM, "gamma0": args.gamma0,
                               "eta": args.eta, "budget": args.budget, "rng": bench.RNG_NAME,
                               "fbf_step": result.step, "bc_lipschitz": result.lipschitz,
                               "dstep_norm": "euclidean"})
    phi = selection_value(sel, result.omega)
    print(
        f"residual={result.final_residual:.6e} phi={phi:.6e} "
        f"inner_iterations={result.iterations} trace={path}"
    )
    return EXIT_OK


def _experiment_config(args) -> bench.ExperimentConfig:
    if args.config is not None:
        cfg = bench.ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = bench.ExperimentConfig()
    updates = {}
    if getattr(args, "instances", None) is not None:
        updates["n_instances"] = args.instances
    if getattr(args, "budget", None) is not None:
        updates["budget"] = args.budget
    if updates:
        import dataclasses

        cfg = dataclasses.replace(cfg, **updates)
    return cfg


def _cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    path = bench.run_sweep(cfg, args.out, args.sweep, jobs=args.jobs)
    print(f"sweep={args.sweep} instances={cfg.n_instances} budget={cfg.budget} aggregate={path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _experiment_config(args)
    path = bench.run_comparison(cfg, args.out, jobs=args.jobs)
    print(f"comparison instances={cfg.n_instances} budget={cfg.budget} aggregate={path}")
    return EXIT_OK


def _cmd_oracle_check(args) -> int:
    from .oracle_scenarios import run_scenario

    report = run_scenario(args.scenario, args.seed)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


_HANDLERS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "fbf": _cmd_fbf,
    "hsdm": _cmd_hsdm,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "oracle-check": _cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigurationError, InnerLoopError, OracleError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
