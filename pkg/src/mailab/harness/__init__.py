"""Experiment harness: configuration files, presets, analysis exports
and the command-line interface."""

from .config import ExperimentConfig
from .presets import (
    TABLE1_PRESETS,
    TABLE2_PRESETS,
    STRATEGY_PRESETS,
    list_presets,
    preset_config,
)
from .exports import (
    meets_threshold,
    summarize,
    write_report_csv,
    export_embeddings,
    export_code_stats,
)

__all__ = [
    "ExperimentConfig",
    "TABLE1_PRESETS",
    "TABLE2_PRESETS",
    "STRATEGY_PRESETS",
    "list_presets",
    "preset_config",
    "meets_threshold",
    "summarize",
    "write_report_csv",
    "export_embeddings",
    "export_code_stats",
]
