from .experiments import EXPERIMENT_NAMES, RunManifest, RunResult, run_experiment
from .metrics import (
    MetricReport,
    integrated_rmse,
    mixture_rmse,
    param_rmse,
    predictive_rmse,
    rmse,
    trace_rmse,
)
from .scenarios import ContaminationSpec, ScenarioConfig, build_model, generate_dataset

__all__ = [
    "EXPERIMENT_NAMES",
    "RunManifest",
    "RunResult",
    "run_experiment",
    "MetricReport",
    "integrated_rmse",
    "mixture_rmse",
    "param_rmse",
    "predictive_rmse",
    "rmse",
    "trace_rmse",
    "ContaminationSpec",
    "ScenarioConfig",
    "build_model",
    "generate_dataset",
]
