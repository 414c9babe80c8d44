"""Shared fixtures; the heavy Monte Carlo datasets are session scoped.

Every fixture pins the master seed, so the expensive runs are bit
reproducible and their statistics can be asserted against fixed bands.
Slow fixtures (the 817-replication surrogate test, the 5000-trial cut
point calibration) are only built when a test marked ``slow`` actually
runs.
"""

from __future__ import annotations

import numpy as np
import pytest

from matchlab.experiments import (
    ExperimentConfig,
    run_full_model_test,
    run_matching_bench,
    run_mean_growth,
)
from matchlab.hazard import calibrate_cutpoints
from matchlab import dyadic
from matchlab.geometry import Metric, replication_stream

MASTER_SEED = 20240817


@pytest.fixture(scope="session")
def bench_309(tmp_path_factory) -> dict:
    """309 shared-sample replications of all three matchers at n = 1024."""
    config = ExperimentConfig(
        seed=MASTER_SEED,
        reps=309,
        sizes=(1024,),
        metric=Metric.PLANE,
        kinds=("uniform",),
        out_dir=tmp_path_factory.mktemp("bench"),
    )
    return run_matching_bench(config)


@pytest.fixture(scope="session")
def growth_300(tmp_path_factory) -> dict:
    """300-replication toroidal mean-cost table over n = 2^0 .. 2^11."""
    config = ExperimentConfig(
        seed=MASTER_SEED,
        reps=300,
        metric=Metric.TORUS,
        out_dir=tmp_path_factory.mktemp("growth"),
    )
    return run_mean_growth(config)


@pytest.fixture(scope="session")
def dyadic_300() -> list:
    """300 merge-chain replications up to level 10 (records only)."""
    records = []
    for rep in range(300):
        rng = replication_stream(MASTER_SEED, rep)
        records.extend(dyadic.run_chain(rep, 10, rng, Metric.TORUS))
    return records


@pytest.fixture(scope="session")
def model_817(tmp_path_factory) -> dict:
    """Full surrogate-model pipeline at the 817-replication scale (slow)."""
    config = ExperimentConfig(
        seed=MASTER_SEED,
        reps=817,
        metric=Metric.TORUS,
        k_max=10,
        out_dir=tmp_path_factory.mktemp("modeltest"),
    )
    return run_full_model_test(config)


@pytest.fixture(scope="session")
def calibration_5000():
    """Official 817-observation, 5000-trial cut-point calibration (slow)."""
    return calibrate_cutpoints(817, 5000, master_seed=MASTER_SEED)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
