"""levydetect: quickest change detection for Levy processes.

The package builds the likelihood-ratio machinery of sequential change
detection for Levy processes (Brownian with drift, compound Poisson,
jump-diffusion, gamma subordinator), simulates changed trajectories, runs
CUSUM-type and competing stopping rules, and provides a Monte Carlo harness
for run-length calibration, worst-case delay measurement, and the
lower-bound / nested-grid structure underneath the CUSUM optimality theory.
"""

from .detector import (
    CusumState,
    DetectorConfig,
    StopResult,
    cusum_log_stats,
    cusum_update,
    drawup,
    first_passage,
    mle_changepoint,
    run_rule,
)
from .families import (
    ExponentialJumps,
    GaussianJumps,
    LevySpec,
    TwoSidedExponentialJumps,
)
from .kernels import backend as kernel_backend
from .likelihood import (
    GaussianIncrements,
    LLRPath,
    PoissonCounts,
    llr_increment_iid,
    llr_path,
    martingale_check,
)
from .model import (
    ChangeModel,
    DensityRatio,
    build_change_model,
    drift_constants,
    phi_eval,
)
from .paths import IncrementSeries, SamplePath, restrict_to_grid, sample_changed_path
from .report import EvalReport, Provenance
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "LevySpec",
    "GaussianJumps",
    "ExponentialJumps",
    "TwoSidedExponentialJumps",
    "ChangeModel",
    "DensityRatio",
    "build_change_model",
    "phi_eval",
    "drift_constants",
    "RngStream",
    "SamplePath",
    "IncrementSeries",
    "sample_changed_path",
    "restrict_to_grid",
    "LLRPath",
    "llr_path",
    "llr_increment_iid",
    "martingale_check",
    "GaussianIncrements",
    "PoissonCounts",
    "DetectorConfig",
    "CusumState",
    "StopResult",
    "cusum_update",
    "cusum_log_stats",
    "drawup",
    "first_passage",
    "run_rule",
    "mle_changepoint",
    "EvalReport",
    "Provenance",
    "kernel_backend",
    "__version__",
]
