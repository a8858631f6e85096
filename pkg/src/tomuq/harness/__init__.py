"""Experiment orchestration: config, synthetic worlds, runs, reports, CLI."""

from tomuq.harness.config import ExperimentConfig, Method, Task, parse_config
from tomuq.harness.report import emit_report, report_row
from tomuq.harness.runner import (
    RunRecord,
    load_run,
    rescore_run,
    run_experiment,
    run_greedy_vs_bot,
)
from tomuq.harness.synth import SyntheticWorld, synth_world

__all__ = [
    "ExperimentConfig",
    "Method",
    "RunRecord",
    "SyntheticWorld",
    "Task",
    "emit_report",
    "load_run",
    "parse_config",
    "report_row",
    "rescore_run",
    "run_experiment",
    "run_greedy_vs_bot",
    "synth_world",
]
