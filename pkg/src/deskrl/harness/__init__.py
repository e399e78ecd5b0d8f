"""Experiment harness: configs, runner, curves, reports."""

from .config import VARIANTS, ExperimentConfig
from .curves import (
    LearningCurve,
    read_learning_curve_csv,
    steps_to_threshold,
    write_eval_csv,
    write_learning_curve_csv,
)
from .report import emit_report
from .run import SeedRun, run_experiment

__all__ = [
    "ExperimentConfig", "VARIANTS", "LearningCurve", "write_learning_curve_csv",
    "read_learning_curve_csv", "write_eval_csv", "steps_to_threshold",
    "emit_report", "run_experiment", "SeedRun",
]
