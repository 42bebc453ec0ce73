"""Capacity planning and response-time anomaly detection for central-queue
multi-server systems under a bimodal (regular/attack) workload.

The package combines closed-form M/G/K response-time approximations, an
exact M/G/1 baseline, a fast workload-vector simulator, and single-feature
threshold classifiers to study how the number of servers trades off mean
response time, response-time variability, and detectability of anomalies.
"""

__version__ = "0.1.0"

from .analytic import (
    CENTERED,
    HEAVY_TAIL,
    ErlangC,
    OptimalServers,
    QueueMetrics,
    Simulated,
    erlang_c,
    mean_response_time,
    mg1_exact,
    optimal_servers,
    sweep,
    var_response_time,
)
from .calibrate import estimate_params, load_samples
from .detect import (
    Label,
    accuracy_vs_k,
    build_dataset,
    evaluate,
    impaired_fraction,
    pooled_t_test,
    split,
    train,
    welch_test,
)
from .errors import SaturationError, ValidationError
from .sim import (
    JobClass,
    JobRecord,
    JobTrace,
    SimSummary,
    kw_step,
    label_impaired,
    run_rounds,
    sim_optimal_servers,
    simulate,
)
from .stats import RngStream, RunningMoments, ci_halfwidth, exp_variate, student_t_sf
from .workload import MomentSet, ServerConfig, WorkloadSpec, make_workload, moments

__all__ = [
    "__version__",
    "CENTERED",
    "HEAVY_TAIL",
    "ErlangC",
    "Simulated",
    "QueueMetrics",
    "OptimalServers",
    "erlang_c",
    "mean_response_time",
    "var_response_time",
    "mg1_exact",
    "optimal_servers",
    "sweep",
    "estimate_params",
    "load_samples",
    "Label",
    "accuracy_vs_k",
    "build_dataset",
    "evaluate",
    "impaired_fraction",
    "pooled_t_test",
    "split",
    "train",
    "welch_test",
    "SaturationError",
    "ValidationError",
    "JobClass",
    "JobRecord",
    "JobTrace",
    "SimSummary",
    "kw_step",
    "label_impaired",
    "run_rounds",
    "sim_optimal_servers",
    "simulate",
    "RngStream",
    "RunningMoments",
    "ci_halfwidth",
    "exp_variate",
    "student_t_sf",
    "WorkloadSpec",
    "MomentSet",
    "ServerConfig",
    "make_workload",
    "moments",
]
