"""Command-line entry point.

Subcommands map to the experiment protocols: ``run`` for one run,
``experiment1``/``experiment2`` for the forced population-size schedules,
``kappa-sweep`` for the correction-scale calibration, ``compare`` for the
paired head-to-head, and ``selftest`` for a quick invariant suite.
Every written file path is echoed to stdout; existing files are never
overwritten without ``--force``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from psaes.experiments import (
    RunConfig,
    comparison_summary_text,
    runs_summary_text,
    run,
    run_comparison,
    run_experiment1,
    run_kappa_sweep,
    run_many,
    sweep_summary_text,
    write_runs_csv,
    write_sweep_csv,
    write_trace_csv,
)

CONFIG_KEYS = {
    "function": str,
    "dim": int,
    "seed": int,
    "algorithm": str,
    "kappa": float,
    "L": int,
    "g_max": int,
    "tolerance": float,
    "lambda_schedule": str,
    "monte_carlo_M": int,
    "mu_proxy_mode": str,
    "include_sigma_scale": lambda s: s.lower() in ("1", "true", "yes"),
    "clamp_to_domain": lambda s: s.lower() in ("1", "true", "yes"),
}


def _kappa_type(value: str) -> float:
    x = float(value)
    if not 0.0 < x <= 1.0:
        raise argparse.ArgumentTypeError(f"kappa must be in (0, 1], got {x}")
    return x


def _positive_int(value: str) -> int:
    x = int(value)
    if x < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {x}")
    return x


def _positive_float(value: str) -> float:
    x = float(value)
    if x <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive value, got {x}")
    return x


def load_config_file(path: Path) -> dict:
    """Parse a key=value config file mirroring the run-config fields."""
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = CONFIG_KEYS[key](val)
    return values


def config_to_text(config: RunConfig) -> str:
    lines = [f"{key}={getattr(config, key)}" for key in CONFIG_KEYS]
    return "\n".join(lines) + "\n"


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--function", choices=["rastrigin", "schaffer", "sphere"],
                   default="rastrigin")
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--algorithm", default="psa-reformulated",
                   choices=["cma-es", "psa-general", "psa-reformulated",
                            "psa-no-correction"])
    p.add_argument("--kappa", type=_kappa_type, default=None,
                   help="correction scale in (0, 1]; defaults to 0.5, or 1.0 "
                        "for psa-general")
    p.add_argument("--L", type=_positive_int, default=6,
                   help="significance level for the population-size change")
    p.add_argument("--max-gens", type=_positive_int, default=None,
                   help="generation cap (default 20, or 10 on schaffer)")
    p.add_argument("--tolerance", type=_positive_float, default=1e-2)
    p.add_argument("--schedule", dest="lambda_schedule", default="adaptive",
                   choices=["adaptive", "forced-increasing", "forced-decreasing",
                            "frozen"])
    p.add_argument("--mc-samples", type=_positive_int, default=128,
                   help="Monte Carlo samples for the path normalization")
    p.add_argument("--mu-proxy", dest="mu_proxy_mode",
                   choices=["mean-of-m-components", "f-of-m"],
                   default="mean-of-m-components")
    p.add_argument("--no-sigma-scale", dest="include_sigma_scale",
                   action="store_false",
                   help="drop the sigma factor from the order-statistic scale")
    p.add_argument("--clamp", dest="clamp_to_domain", action="store_true",
                   help="clamp the mean to the function's domain box")
    p.add_argument("--config", type=Path, default=None,
                   help="key=value file supplying defaults for the flags above")


def _build_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    values = {
        "function": args.function,
        "dim": args.dim,
        "seed": args.seed,
        "algorithm": args.algorithm,
        "kappa": args.kappa,
        "L": args.L,
        "g_max": args.max_gens,
        "tolerance": args.tolerance,
        "lambda_schedule": args.lambda_schedule,
        "monte_carlo_M": args.mc_samples,
        "mu_proxy_mode": args.mu_proxy_mode,
        "include_sigma_scale": args.include_sigma_scale,
        "clamp_to_domain": args.clamp_to_domain,
    }
    if args.config is not None:
        try:
            file_values = load_config_file(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        file_values.setdefault("g_max", None)
        # Explicit flags win over config-file values.
        argv = getattr(args, "argv_seen", sys.argv[1:])
        flag_names = {
            "g_max": "max_gens",
            "monte_carlo_M": "mc_samples",
            "mu_proxy_mode": "mu_proxy",
            "lambda_schedule": "schedule",
            "include_sigma_scale": "no_sigma_scale",
            "clamp_to_domain": "clamp",
        }
        for key, val in file_values.items():
            if _flag_was_passed(flag_names.get(key, key), argv):
                continue
            values[key] = val
    if values["kappa"] is None:
        values["kappa"] = 1.0 if values["algorithm"] == "psa-general" else 0.5
    if values["g_max"] is None:
        values["g_max"] = 10 if values["function"] == "schaffer" else 20
    try:
        return RunConfig(**values)
    except ValueError as exc:
        parser.error(str(exc))


def _flag_was_passed(dest: str, argv: list[str]) -> bool:
    flag = "--" + dest.replace("_", "-")
    return any(a == flag or a.startswith(flag + "=") for a in argv)


def _out_dir(args: argparse.Namespace) -> Path:
    env = os.environ.get("PSAES_OUT")
    out = Path(env) if env else args.out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(path: Path, writer, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    writer(path)
    print(path)


def _seed_list(args: argparse.Namespace) -> list[int]:
    return list(range(1, args.runs + 1))


def cmd_run(args, parser) -> int:
    config = _build_config(args, parser)
    record = run(config)
    out = _out_dir(args)
    _emit(out / f"trace-{config.run_id}.csv", lambda p: write_trace_csv(record, p), args.force)
    _emit(out / f"run-{config.run_id}.csv", lambda p: write_runs_csv([record], p), args.force)
    print(f"val={record.val:.6g} gap={record.gap:.6g} f_N={record.f_N:.2f} "
          f"generations={record.generations}")
    return 0


def cmd_experiment(args, parser, with_correction: bool) -> int:
    base = _build_config(args, parser)
    out = _out_dir(args)
    records = []
    for seed in _seed_list(args):
        from dataclasses import replace
        rec = run_experiment1(args.direction, with_correction, replace(base, seed=seed))
        records.append(rec)
        _emit(out / f"trace-{rec.config.run_id}.csv",
              lambda p, r=rec: write_trace_csv(r, p), args.force)
    tag = "exp1" if with_correction else "exp2"
    _emit(out / f"{tag}-{base.function}-{args.direction}.csv",
          lambda p: write_runs_csv(records, p), args.force)
    title = (f"Forced-{args.direction} schedule on {base.function}, "
             f"correction {'on' if with_correction else 'off'}")
    _emit(out / f"{tag}-{base.function}-{args.direction}.txt",
          lambda p: p.write_text(runs_summary_text(title, records) + "\n"),
          args.force)
    return 0


def cmd_kappa_sweep(args, parser) -> int:
    base = _build_config(args, parser)
    out = _out_dir(args)
    summaries, by_kappa = run_kappa_sweep(
        base.function, _seed_list(args), g_max=base.g_max, jobs=args.jobs,
        monte_carlo_M=base.monte_carlo_M,
    )
    for records in by_kappa.values():
        for rec in records:
            _emit(out / f"trace-{rec.config.run_id}.csv",
                  lambda p, r=rec: write_trace_csv(r, p), args.force)
    _emit(out / f"kappa-sweep-{base.function}.csv",
          lambda p: write_sweep_csv(summaries, p), args.force)
    _emit(out / f"kappa-sweep-{base.function}.txt",
          lambda p: p.write_text(sweep_summary_text(summaries) + "\n"), args.force)
    return 0


def cmd_compare(args, parser) -> int:
    base = _build_config(args, parser)
    out = _out_dir(args)
    results = run_comparison(base.function, _seed_list(args), base.g_max,
                             kappa=base.kappa, L=base.L, jobs=args.jobs,
                             monte_carlo_M=base.monte_carlo_M)
    all_records = []
    for records in results.values():
        all_records += records
        for rec in records:
            _emit(out / f"trace-{rec.config.run_id}.csv",
                  lambda p, r=rec: write_trace_csv(r, p), args.force)
    _emit(out / f"compare-{base.function}.csv",
          lambda p: write_runs_csv(all_records, p), args.force)
    _emit(out / f"compare-{base.function}.txt",
          lambda p: p.write_text(comparison_summary_text(base.function, results) + "\n"),
          args.force)
    return 0


def cmd_selftest(args, parser) -> int:
    import math

    from psaes.core import default_lambda, derive_params, expected_norm
    from psaes.correction import RhoInputs, theorem1_ratio_check
    from psaes.rng import substream, TAG_NEUTRAL

    passed = failed = 0

    def check(name: str, ok: bool) -> None:
        nonlocal passed, failed
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        passed, failed = passed + int(ok), failed + int(not ok)

    vals = []
    for seed in (1, 2, 3, 4, 5):
        rec = run(RunConfig(function="sphere", dim=2, seed=seed, algorithm="cma-es",
                            g_max=250, tolerance=1e-9))
        vals.append(rec.val)
    check("sphere convergence (5 seeds, best-f < 1e-8)",
          sum(v < 1e-8 for v in vals) >= 4)

    lam = default_lambda(2)
    params = derive_params(lam, 2)
    rng = substream(0, 0, TAG_NEUTRAL)
    draws = np.sort(rng.standard_normal((200_000, lam)), axis=1)
    mc = draws.mean(axis=0)
    from psaes.correction import expected_order_stat
    base = RhoInputs(lambda_r=lam, weights=params.weights, mu_w=params.mu_w, n=2,
                     mu_proxy=0.0, sigma=1.0)
    blom = [expected_order_stat(i, base) for i in range(1, lam + 1)]
    check("order-statistic approximation vs Monte Carlo (tol 0.02)",
          max(abs(b - m) for b, m in zip(blom, mc)) < 0.02)

    grid = np.linspace(3.0, 0.1, 30)
    inputs = RhoInputs(lambda_r=lam, weights=params.weights, mu_w=params.mu_w, n=2,
                       mu_proxy=0.0, sigma=0.7)
    check("rho ratio nondecreasing along a mean-proxy descent",
          theorem1_ratio_check(grid, inputs))

    check("expected-norm approximation close to exact (n=2)",
          abs(expected_norm(2) - math.sqrt(2) * math.gamma(1.5) / math.gamma(1.0)) < 1e-2)

    print(f"{passed} passed, {failed} failed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psaes",
        description="Population-size-adaptive CMA-ES with step-size correction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one optimizer run, written as a trace CSV")
    _add_run_flags(p_run)

    p_e1 = sub.add_parser("experiment1",
                          help="forced population-size schedule with the correction")
    _add_run_flags(p_e1)
    p_e1.add_argument("--direction", choices=["increasing", "decreasing"],
                      default="increasing")
    p_e1.add_argument("--runs", type=_positive_int, default=20)

    p_e2 = sub.add_parser("experiment2",
                          help="forced population-size schedule without the correction")
    _add_run_flags(p_e2)
    p_e2.add_argument("--direction", choices=["increasing", "decreasing"],
                      default="increasing")
    p_e2.add_argument("--runs", type=_positive_int, default=20)

    p_sweep = sub.add_parser("kappa-sweep", help="correction-scale calibration sweep")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--runs", type=_positive_int, default=20)
    p_sweep.add_argument("--jobs", type=_positive_int, default=1)

    p_cmp = sub.add_parser("compare", help="paired head-to-head comparison")
    _add_run_flags(p_cmp)
    p_cmp.add_argument("--runs", type=_positive_int, default=20)
    p_cmp.add_argument("--jobs", type=_positive_int, default=1)

    p_self = sub.add_parser("selftest", help="run the built-in invariant suite")
    p_self.add_argument("--out", type=Path, default=Path("psaes-out"))

    for p in (p_run, p_e1, p_e2, p_sweep, p_cmp):
        p.add_argument("--out", type=Path, default=Path("psaes-out"),
                       help="output directory (PSAES_OUT overrides)")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv_seen = argv if argv is not None else sys.argv[1:]
    try:
        if args.command == "run":
            return cmd_run(args, parser)
        if args.command == "experiment1":
            return cmd_experiment(args, parser, with_correction=True)
        if args.command == "experiment2":
            return cmd_experiment(args, parser, with_correction=False)
        if args.command == "kappa-sweep":
            return cmd_kappa_sweep(args, parser)
        if args.command == "compare":
            return cmd_compare(args, parser)
        if args.command == "selftest":
            return cmd_selftest(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except FileExistsError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # echo the failing setup, then fail
        print(f"error: {exc}", file=sys.stderr)
        if hasattr(args, "function"):
            print(f"while running: {vars(args)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
