"""Disturbance-observer based identification and pose prediction for planar pushing."""

from .data import ForcePlan, PushTrajectory, load_params, load_trajectory, save_trajectory, subsample_plan
from .dynamics import IntegrationDivergedError, ObjectParams, PlanarState, Wrench, integrate_step, simulate
from .force_recon import GainFailureError, PidForceReconstructor, PidGains, reconstruct
from .identify import LinearModel, RecursiveLinearFit, identify_channels, rls_initialize, rls_update
from .metrics import AlignmentError, PredictionReport, improvement_ratio, summarize
from .observer import (
    DisturbanceObserver,
    ObserverConfigError,
    ObserverState,
    QFilterParams,
    realize_filters,
    reset,
    step,
)
from .predict import (
    PipelineConfig,
    PushPosePredictor,
    SimpleFrictionPredictor,
    build_schedule,
    predict_pose,
    predict_simple,
    run_pipeline,
)
from .synth import SynthScenario, generate

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "DisturbanceObserver",
    "ForcePlan",
    "GainFailureError",
    "IntegrationDivergedError",
    "LinearModel",
    "ObjectParams",
    "ObserverConfigError",
    "ObserverState",
    "PidForceReconstructor",
    "PidGains",
    "PipelineConfig",
    "PlanarState",
    "PredictionReport",
    "PushPosePredictor",
    "PushTrajectory",
    "QFilterParams",
    "RecursiveLinearFit",
    "SimpleFrictionPredictor",
    "SynthScenario",
    "Wrench",
    "build_schedule",
    "generate",
    "identify_channels",
    "improvement_ratio",
    "integrate_step",
    "load_params",
    "load_trajectory",
    "predict_pose",
    "predict_simple",
    "realize_filters",
    "reconstruct",
    "reset",
    "rls_initialize",
    "rls_update",
    "run_pipeline",
    "save_trajectory",
    "simulate",
    "step",
    "subsample_plan",
    "summarize",
]
