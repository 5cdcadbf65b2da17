"""Shared fixtures: the reference experiment is expensive enough to run once
per session and share across the verification and acceptance tests."""

import numpy as np
import pytest

from fracsys.config import ExperimentConfig
from fracsys.exponents import SystemParams, classify
from fracsys.kernels import SpectralGrid
from fracsys.solver import InitialData, RunConfig, TimeMesh


REF_EPSILON = 1e-2


def reference_params() -> SystemParams:
    return SystemParams(alpha=(2.0, 2.0), beta=(4.0, 4.0), rho=(1.0, 1.0),
                        sigma=(0.0, 0.0), dim=1)


def reference_config(epsilon=REF_EPSILON, coupling=1.0) -> ExperimentConfig:
    params = reference_params()
    return ExperimentConfig(
        params=params,
        grid=SpectralGrid(1, 2048, 60.0),
        mesh=TimeMesh(50.0, 500),
        init=InitialData("stable_kernel", epsilon=epsilon),
        picard_tol=1e-10,
        picard_max_iter=25,
        dealias="two_thirds",
        snapshot_stride=10,
        coupling_scale=coupling,
        delta=0.3,
        run_id="ref",
        output_dir="out",
    )


@pytest.fixture(scope="session")
def ref_report():
    return classify(reference_params(), delta=0.3)


@pytest.fixture(scope="session")
def ref_outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("refrun")


@pytest.fixture(scope="session")
def ref_run(ref_outdir, ref_report):
    """Reference experiment through the CLI runner (artifacts on disk)."""
    import time

    from fracsys.cli import run_experiment

    start = time.perf_counter()
    cfg = reference_config()
    code, row, result = run_experiment(cfg, ref_outdir / "a")
    assert code == 0
    return {"config": cfg, "row": row, "result": result, "dir": ref_outdir / "a",
            "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="session")
def ref_linear_run(ref_report):
    """Same experiment with the coupling switched off."""
    import time

    from fracsys.solver import solve

    start = time.perf_counter()
    cfg = reference_config(coupling=0.0)
    result = solve(cfg.run_config(), ref_report)
    assert result.status.completed
    result.diagnostics["elapsed"] = time.perf_counter() - start
    return result
