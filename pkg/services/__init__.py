"""Services layer for QCNN experiments.

Configuration and record models shared by the CLI, the harness and the
sweep workers.
"""
from services.config import (
    ConfigError,
    RuntimeConfig,
    build_experiment_config,
    load_config_file,
)
from services.models import (
    EpochRecord,
    ExperimentConfig,
    GradcheckReport,
    RunMetrics,
    SelftestCheck,
    SelftestReport,
    SweepCell,
)

__all__ = [
    "ConfigError",
    "RuntimeConfig",
    "build_experiment_config",
    "load_config_file",
    "EpochRecord",
    "ExperimentConfig",
    "GradcheckReport",
    "RunMetrics",
    "SelftestCheck",
    "SelftestReport",
    "SweepCell",
]
