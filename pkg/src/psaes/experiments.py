"""Experiment harness: run loop, trace schema, and the benchmark protocols.

A run is fully described by a ``RunConfig``; identical configs (including
the seed) produce bit-identical traces except for the wall-clock columns.
The harness covers four protocols: forced population-size schedules with
and without the correction, the kappa calibration sweep, and the paired
20-run head-to-head comparison.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from psaes.benchmarks import get_function, init_state
from psaes.core import DistributionState, default_lambda, initial_paths
from psaes.generation import (
    ALGORITHMS,
    SCHEDULES,
    GenerationOptions,
    collect_violations,
    run_generation,
)
from psaes.psa import initial_psa_state
from psaes.rng import TAG_INIT, substream


@dataclass
class RunConfig:
    """Inputs of one optimizer run."""

    function: str = "rastrigin"
    dim: int = 2
    seed: int = 1
    algorithm: str = "psa-reformulated"
    kappa: float = 0.5
    L: int = 6
    g_max: int = 20
    tolerance: float = 1e-2
    lambda_schedule: str = "adaptive"
    monte_carlo_M: int = 128
    mu_proxy_mode: str = "mean-of-m-components"
    include_sigma_scale: bool = True
    clamp_to_domain: bool = False

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.lambda_schedule not in SCHEDULES:
            raise ValueError(
                f"lambda_schedule must be one of {SCHEDULES}, got {self.lambda_schedule!r}"
            )
        if self.algorithm == "cma-es":
            self.lambda_schedule = "frozen"
        if self.g_max < 1:
            raise ValueError(f"g_max must be >= 1, got {self.g_max}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.monte_carlo_M < 1:
            raise ValueError(f"monte_carlo_M must be >= 1, got {self.monte_carlo_M}")

    @property
    def run_id(self) -> str:
        return (
            f"{self.function}-d{self.dim}-{self.algorithm}-{self.lambda_schedule}"
            f"-k{self.kappa:g}-L{self.L}-g{self.g_max}-s{self.seed}"
        )


@dataclass(frozen=True)
class TraceRow:
    """One generation of one run, in the documented column order."""

    run_id: str
    g: int
    lambda_real: float
    lambda_r: int
    sigma_pre_correction: float
    sigma_post_correction: float
    correction_branch: int
    p_sigma_norm: float
    f_best: float
    f_of_mean: float
    m: np.ndarray
    fevals_cumulative: int
    wall_micros: int


def trace_header(dim: int) -> list[str]:
    cols = [
        "run_id",
        "g",
        "lambda_real",
        "lambda_r",
        "sigma_pre_correction",
        "sigma_post_correction",
        "correction_branch",
        "p_sigma_norm",
        "f_best",
        "f_of_mean",
    ]
    cols += [f"m_{i}" for i in range(1, dim + 1)]
    cols += ["fevals_cumulative", "wall_micros"]
    return cols


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def trace_row_fields(row: TraceRow) -> list[str]:
    fields = [
        row.run_id,
        str(row.g),
        _fmt(row.lambda_real),
        str(row.lambda_r),
        _fmt(row.sigma_pre_correction),
        _fmt(row.sigma_post_correction),
        str(row.correction_branch),
        _fmt(row.p_sigma_norm),
        _fmt(row.f_best),
        _fmt(row.f_of_mean),
    ]
    fields += [_fmt(v) for v in row.m]
    fields += [str(row.fevals_cumulative), str(row.wall_micros)]
    return fields


@dataclass
class RunRecord:
    """A completed run: its config, per-generation trace and summary."""

    config: RunConfig
    trace: list[TraceRow]
    val: float                  # best objective value found
    gap: float                  # |f* - val|
    f_N: float                  # average evaluations per generation
    generations: int
    wall_seconds: float
    violations: list[str] = field(default_factory=list)


def run(config: RunConfig, validate: bool = False) -> RunRecord:
    """Execute one run to its stopping condition.

    Stops when the best value found is within ``tolerance`` of the known
    optimum or after ``g_max`` generations, whichever comes first.
    """
    fn = get_function(config.function, config.dim)
    options = GenerationOptions(
        algorithm=config.algorithm,
        kappa=config.kappa,
        L=config.L,
        mu_proxy_mode=config.mu_proxy_mode,
        include_sigma_scale=config.include_sigma_scale,
        lambda_schedule=config.lambda_schedule,
        mc_samples=config.monte_carlo_M,
        seed=config.seed,
        clamp_to_domain=config.clamp_to_domain,
    )
    m0, sigma0 = init_state(fn, substream(config.seed, 0, TAG_INIT))
    state = DistributionState(m=m0, sigma=sigma0, C=np.eye(config.dim), generation=0)
    paths = initial_paths(config.dim)
    psa = initial_psa_state(config.dim, default_lambda(config.dim))

    trace: list[TraceRow] = []
    violations: list[str] = []
    fevals = 0
    best = float("inf")
    t_run = time.perf_counter()
    for g in range(config.g_max):
        forced = None
        if config.lambda_schedule in ("forced-increasing", "forced-decreasing"):
            direction = config.lambda_schedule.removeprefix("forced-")
            forced = forced_lambda_schedule(
                g, direction, psa.lambda_r, psa.lambda_min, psa.lambda_max
            )
        t_gen = time.perf_counter()
        result = run_generation(state, paths, psa, fn, options, forced_lambda_next=forced)
        wall_micros = int((time.perf_counter() - t_gen) * 1e6)
        fevals += result.n_evals
        trace.append(
            TraceRow(
                run_id=config.run_id,
                g=g,
                lambda_real=result.lambda_real_used,
                lambda_r=result.lambda_r_used,
                sigma_pre_correction=result.sigma_pre_correction,
                sigma_post_correction=result.sigma_post_correction,
                correction_branch=result.correction_branch,
                p_sigma_norm=result.p_sigma_norm,
                f_best=result.f_best,
                f_of_mean=result.f_of_mean,
                m=result.state.m.copy(),
                fevals_cumulative=fevals,
                wall_micros=wall_micros,
            )
        )
        if validate:
            violations += [f"{config.run_id} g={g}: {v}" for v in collect_violations(result)]
        state, paths, psa = result.state, result.paths, result.psa
        best = min(best, result.f_best)
        if abs(best - fn.known_optimum_value) <= config.tolerance:
            break
    wall_seconds = time.perf_counter() - t_run
    generations = len(trace)
    return RunRecord(
        config=config,
        trace=trace,
        val=best,
        gap=abs(fn.known_optimum_value - best),
        f_N=fevals / generations,
        generations=generations,
        wall_seconds=wall_seconds,
        violations=violations,
    )


def _run_one(args: tuple[RunConfig, bool]) -> RunRecord:
    config, validate = args
    return run(config, validate=validate)


def run_many(configs: list[RunConfig], jobs: int = 1, validate: bool = False) -> list[RunRecord]:
    """Run independent configs, optionally across processes, preserving order."""
    if jobs <= 1 or len(configs) <= 1:
        return [run(c, validate=validate) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, [(c, validate) for c in configs]))


def forced_lambda_schedule(
    g: int, direction: str, lambda_current: int, lambda_min: int, lambda_max: int
) -> int:
    """Population size for the next generation under a forced schedule.

    The change at generation g is the triangular number g(g+1)/2, added or
    subtracted, then bounded like any population-size update.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError(f"direction must be increasing or decreasing, got {direction!r}")
    step = g * (g + 1) // 2
    nxt = lambda_current + step if direction == "increasing" else lambda_current - step
    return min(max(nxt, lambda_min), lambda_max)


def run_experiment1(direction: str, with_correction: bool, config: RunConfig,
                    validate: bool = False) -> RunRecord:
    """Forced-schedule run, with the always-on correction or none at all."""
    cfg = replace(
        config,
        algorithm="psa-general" if with_correction else "psa-no-correction",
        kappa=1.0,
        lambda_schedule=f"forced-{direction}",
    )
    return run(cfg, validate=validate)


def s_f(mean_cpu: float, mean_gap: float, mean_fn: float) -> float:
    """Composite performance score: uniform-weight sum of the three metrics."""
    if min(mean_cpu, mean_gap, mean_fn) < 0:
        raise ValueError("metrics must be nonnegative")
    return mean_cpu + mean_gap + mean_fn


@dataclass(frozen=True)
class SweepSummary:
    """Per-kappa aggregates over the sweep seeds."""

    function: str
    kappa: float
    mean_cpu_seconds: float
    mean_gap: float
    mean_f_N: float
    mean_generations: float
    s_f: float
    sum_complexity: float


DEFAULT_KAPPAS = tuple(round(0.1 * k, 1) for k in range(11))


def sweep_config(function: str, kappa: float, seed: int, g_max: int = 15,
                 L: int = 6, dim: int = 2, monte_carlo_M: int = 128) -> RunConfig:
    """Config for one sweep cell: the always-on correction scaled by kappa.

    kappa = 0 means the correction is removed entirely, and kappa = 1 is the
    unscaled always-on rule.
    """
    if kappa == 0.0:
        return RunConfig(
            function=function, dim=dim, seed=seed, algorithm="psa-no-correction",
            kappa=1.0, L=L, g_max=g_max, monte_carlo_M=monte_carlo_M,
        )
    return RunConfig(
        function=function, dim=dim, seed=seed, algorithm="psa-general",
        kappa=kappa, L=L, g_max=g_max, monte_carlo_M=monte_carlo_M,
    )


def summarize_sweep_cell(function: str, kappa: float, records: list[RunRecord]) -> SweepSummary:
    mean_cpu = float(np.mean([r.wall_seconds for r in records]))
    mean_gap = float(np.mean([r.gap for r in records]))
    mean_fn = float(np.mean([r.f_N for r in records]))
    mean_gens = float(np.mean([r.generations for r in records]))
    return SweepSummary(
        function=function,
        kappa=kappa,
        mean_cpu_seconds=mean_cpu,
        mean_gap=mean_gap,
        mean_f_N=mean_fn,
        mean_generations=mean_gens,
        s_f=s_f(mean_cpu, mean_gap, mean_fn),
        sum_complexity=mean_cpu + mean_gap + mean_fn + mean_gens,
    )


def run_kappa_sweep(
    function: str,
    seeds: list[int],
    g_max: int = 15,
    kappas: tuple[float, ...] = DEFAULT_KAPPAS,
    jobs: int = 1,
    validate: bool = False,
    monte_carlo_M: int = 128,
) -> tuple[list[SweepSummary], dict[float, list[RunRecord]]]:
    """Scale the always-on correction by each kappa and aggregate over seeds."""
    summaries: list[SweepSummary] = []
    by_kappa: dict[float, list[RunRecord]] = {}
    for kappa in kappas:
        configs = [sweep_config(function, kappa, seed, g_max=g_max,
                                monte_carlo_M=monte_carlo_M) for seed in seeds]
        records = run_many(configs, jobs=jobs, validate=validate)
        by_kappa[kappa] = records
        summaries.append(summarize_sweep_cell(function, kappa, records))
    return summaries, by_kappa


def run_comparison(
    function: str,
    seeds: list[int],
    g_max: int,
    kappa: float = 0.5,
    L: int = 6,
    jobs: int = 1,
    validate: bool = False,
    monte_carlo_M: int = 128,
) -> dict[str, list[RunRecord]]:
    """Paired-seed head-to-head: always-on correction vs the conditional rule."""
    out: dict[str, list[RunRecord]] = {}
    for algorithm, kap in (("psa-general", 1.0), ("psa-reformulated", kappa)):
        configs = [
            RunConfig(
                function=function, dim=2, seed=seed, algorithm=algorithm,
                kappa=kap, L=L, g_max=g_max, monte_carlo_M=monte_carlo_M,
            )
            for seed in seeds
        ]
        out[algorithm] = run_many(configs, jobs=jobs, validate=validate)
    return out


# ---------------------------------------------------------------------------
# CSV / summary emission
# ---------------------------------------------------------------------------

RUNS_HEADER = [
    "function", "algorithm", "lambda_schedule", "kappa", "L", "seed",
    "cpu_seconds", "val", "gap", "f_N", "generations",
]

SWEEP_HEADER = [
    "function", "kappa", "mean_cpu_seconds", "mean_gap", "mean_f_N",
    "mean_generations", "s_f", "sum_complexity",
]


def write_trace_csv(record: RunRecord, path: Path) -> None:
    lines = [",".join(trace_header(record.config.dim))]
    lines += [",".join(trace_row_fields(row)) for row in record.trace]
    path.write_text("\n".join(lines) + "\n")


def write_runs_csv(records: list[RunRecord], path: Path) -> None:
    lines = [",".join(RUNS_HEADER)]
    for r in records:
        c = r.config
        lines.append(",".join([
            c.function, c.algorithm, c.lambda_schedule, _fmt(c.kappa), str(c.L),
            str(c.seed), _fmt(r.wall_seconds), _fmt(r.val), _fmt(r.gap),
            _fmt(r.f_N), str(r.generations),
        ]))
    path.write_text("\n".join(lines) + "\n")


def write_sweep_csv(summaries: list[SweepSummary], path: Path) -> None:
    lines = [",".join(SWEEP_HEADER)]
    for s in summaries:
        lines.append(",".join([
            s.function, _fmt(s.kappa), _fmt(s.mean_cpu_seconds), _fmt(s.mean_gap),
            _fmt(s.mean_f_N), _fmt(s.mean_generations), _fmt(s.s_f),
            _fmt(s.sum_complexity),
        ]))
    path.write_text("\n".join(lines) + "\n")


def runs_summary_text(title: str, records: list[RunRecord]) -> str:
    """Human-readable per-run table with a final averages row."""
    lines = [title, ""]
    lines.append(f"{'seed':>4} {'cpu_s':>10} {'val':>12} {'f_N':>10} {'gens':>5} "
                 f"{'final_sigma':>12}")
    for r in records:
        lines.append(
            f"{r.config.seed:>4} {r.wall_seconds:>10.4f} {r.val:>12.4f}"
            f" {r.f_N:>10.2f} {r.generations:>5}"
            f" {r.trace[-1].sigma_post_correction:>12.4f}"
        )
    lines.append(
        f"{'avg':>4} {np.mean([r.wall_seconds for r in records]):>10.4f}"
        f" {np.mean([r.val for r in records]):>12.4f}"
        f" {np.mean([r.f_N for r in records]):>10.2f}"
        f" {np.mean([r.generations for r in records]):>5.1f}"
        f" {np.mean([r.trace[-1].sigma_post_correction for r in records]):>12.4f}"
    )
    return "\n".join(lines)


def comparison_summary_text(function: str, results: dict[str, list[RunRecord]]) -> str:
    """Human-readable head-to-head table with per-run rows and averages."""
    lines = [f"Head-to-head on {function} (paired seeds)", ""]
    for algorithm, records in results.items():
        lines.append(f"{algorithm}:")
        lines.append(f"  {'seed':>4} {'cpu_s':>10} {'val':>12} {'f_N':>10} {'gens':>5}")
        for r in records:
            lines.append(
                f"  {r.config.seed:>4} {r.wall_seconds:>10.4f} {r.val:>12.4f}"
                f" {r.f_N:>10.2f} {r.generations:>5}"
            )
        lines.append(
            f"  {'avg':>4} {np.mean([r.wall_seconds for r in records]):>10.4f}"
            f" {np.mean([r.val for r in records]):>12.4f}"
            f" {np.mean([r.f_N for r in records]):>10.2f}"
            f" {np.mean([r.generations for r in records]):>5.1f}"
        )
        lines.append("")
    return "\n".join(lines)


def sweep_summary_text(summaries: list[SweepSummary]) -> str:
    lines = [f"Kappa sweep on {summaries[0].function}", ""]
    lines.append(
        f"{'kappa':>5} {'cpu_s':>10} {'gap':>12} {'f_N':>10} {'gens':>6} "
        f"{'s_f':>12} {'sum':>12}"
    )
    for s in summaries:
        lines.append(
            f"{s.kappa:>5.1f} {s.mean_cpu_seconds:>10.4f} {s.mean_gap:>12.4f}"
            f" {s.mean_f_N:>10.2f} {s.mean_generations:>6.2f} {s.s_f:>12.4f}"
            f" {s.sum_complexity:>12.4f}"
        )
    best = min(summaries, key=lambda s: s.s_f)
    lines.append("")
    lines.append(f"Minimum s_f {best.s_f:.4f} at kappa = {best.kappa:.1f}")
    return "\n".join(lines)
