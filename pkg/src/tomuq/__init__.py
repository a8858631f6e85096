"""Toolkit for quantifying how certain interlocutors are about their beliefs.

The pipeline has four stages: load annotated dialogue corpora (`corpus`),
turn Likert belief annotations into probabilities (`calibrate`), elicit
certainty forecasts from language-model backends (`gateway`, `forecast`),
and fit/score post-hoc correction models (`regress`, `metrics`).  The
`harness` subpackage orchestrates full experiments and owns the CLI.
"""

from tomuq.errors import (
    BackendError,
    CalibrationError,
    CertaintyParseError,
    ConfigError,
    CorpusError,
    FitError,
    ForecastError,
    MetricError,
    PromptError,
    TomuqError,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "CalibrationError",
    "CertaintyParseError",
    "ConfigError",
    "CorpusError",
    "FitError",
    "ForecastError",
    "MetricError",
    "PromptError",
    "TomuqError",
    "__version__",
]
