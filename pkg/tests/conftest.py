"""Shared fixtures: the heavy 20-seed batches are run once per session
with structural validation on, and reused by the acceptance checks."""

from __future__ import annotations

import logging

import pytest

from psaes.experiments import RunConfig, run, run_comparison, run_kappa_sweep

SEEDS = list(range(1, 21))

logging.getLogger("psaes").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def comparison_rastrigin():
    return run_comparison("rastrigin", SEEDS, g_max=20, validate=True)


@pytest.fixture(scope="session")
def comparison_schaffer():
    return run_comparison("schaffer", SEEDS, g_max=10, validate=True)


@pytest.fixture(scope="session")
def blowup_records():
    return [
        run(
            RunConfig(
                function="rastrigin", dim=2, seed=seed, algorithm="psa-general",
                kappa=1.0, g_max=20,
            ),
            validate=True,
        )
        for seed in SEEDS
    ]


@pytest.fixture(scope="session")
def ablation_records():
    return [
        run(
            RunConfig(
                function="rastrigin", dim=2, seed=seed, algorithm="psa-no-correction",
                kappa=1.0, g_max=20, lambda_schedule="forced-increasing",
            ),
            validate=True,
        )
        for seed in SEEDS
    ]


@pytest.fixture(scope="session")
def sphere_records():
    return [
        run(
            RunConfig(
                function="sphere", dim=2, seed=seed, algorithm="cma-es",
                g_max=250, tolerance=1e-9,
            ),
            validate=True,
        )
        for seed in SEEDS
    ]


@pytest.fixture(scope="session")
def kappa_sweeps():
    out = {}
    for function in ("rastrigin", "schaffer"):
        out[function] = run_kappa_sweep(function, SEEDS, g_max=15, validate=True)
    return out


@pytest.fixture(scope="session")
def all_validated_records(
    comparison_rastrigin, comparison_schaffer, blowup_records, ablation_records,
    sphere_records, kappa_sweeps,
):
    records = list(blowup_records) + list(ablation_records) + list(sphere_records)
    for results in (comparison_rastrigin, comparison_schaffer):
        for recs in results.values():
            records += recs
    for summaries, by_kappa in kappa_sweeps.values():
        for recs in by_kappa.values():
            records += recs
    return records
