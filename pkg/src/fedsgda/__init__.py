"""Simulator for federated stochastic gradient descent ascent on nonconvex-PL minimax problems."""

from .core import (
    ConfigError,
    ConvergenceError,
    EstimatorKind,
    FedSGDAError,
    GradientEstimate,
    PrimalDualPoint,
    ProtocolError,
    RoundMetrics,
    RoundSchedule,
    RunConfig,
    SamplingMode,
    ScheduleKind,
    SmoothnessConstants,
    UndefinedMetricError,
)
from .engine import ServerState, run, run_round
from .harness import ExperimentConfig, RunSummary, load_config, run_experiment, sweep

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "EstimatorKind",
    "ExperimentConfig",
    "FedSGDAError",
    "GradientEstimate",
    "PrimalDualPoint",
    "ProtocolError",
    "RoundMetrics",
    "RoundSchedule",
    "RunConfig",
    "RunSummary",
    "SamplingMode",
    "ScheduleKind",
    "ServerState",
    "SmoothnessConstants",
    "UndefinedMetricError",
    "load_config",
    "run",
    "run_experiment",
    "run_round",
    "sweep",
]
