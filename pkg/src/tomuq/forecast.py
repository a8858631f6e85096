"""Point estimates from sampled completions.

Direct forecasting takes a single parsed certainty.  Bagging draws several
chain-of-thought completions and averages the valid ones, which lowers the
estimator's variance roughly by the number of samples.  False-uncertainty
estimates compose a forecast-side and a world-side estimate by difference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tomuq.errors import ForecastError
from tomuq.gateway.backends import (
    CompletionBackend,
    SamplingOptions,
    complete,
)
from tomuq.gateway.cache import ResponseCache
from tomuq.gateway.prompts import PromptBundle

FUNQ_TASK = "funq"


@dataclass(frozen=True)
class ForecastEstimate:
    """One per-dialogue point estimate with its sample accounting."""

    dialogue_id: str
    task: str
    value: float
    method_tag: str
    n_used: int

    def __post_init__(self) -> None:
        if self.n_used < 1:
            raise ForecastError("n_used must be at least 1")
        low = -1.0 if self.task == FUNQ_TASK else 0.0
        if not low <= self.value <= 1.0:
            raise ForecastError(
                f"estimate {self.value} outside [{low}, 1] for task {self.task!r}"
            )


def direct_forecast(
    prompt: PromptBundle,
    backend: CompletionBackend,
    sampling: SamplingOptions | None = None,
    cache: ResponseCache | None = None,
    method_tag: str = "df",
) -> ForecastEstimate:
    """Single-sample forecast: the parsed certainty of one completion."""
    sampling = sampling or SamplingOptions()
    if sampling.n_samples != 1:
        sampling = SamplingOptions(
            temperature=sampling.temperature,
            max_new_tokens=sampling.max_new_tokens,
            n_samples=1,
            retry_limit=sampling.retry_limit,
        )
    (sample,) = complete(prompt, sampling, backend, cache)
    if not sample.valid:
        raise ForecastError(
            f"no parseable forecast for dialogue {prompt.dialogue_id!r}"
        )
    return ForecastEstimate(
        dialogue_id=prompt.dialogue_id,
        task=prompt.task.value,
        value=sample.parsed,
        method_tag=method_tag,
        n_used=1,
    )


def bag_of_thoughts(
    prompt: PromptBundle,
    backend: CompletionBackend,
    n_samples: int = 10,
    sampling: SamplingOptions | None = None,
    cache: ResponseCache | None = None,
    method_tag: str | None = None,
) -> ForecastEstimate:
    """Average the valid parsed certainties of ``n_samples`` completions."""
    if n_samples < 1:
        raise ForecastError("n_samples must be at least 1")
    base = sampling or SamplingOptions()
    sampling = SamplingOptions(
        temperature=base.temperature,
        max_new_tokens=base.max_new_tokens,
        n_samples=n_samples,
        retry_limit=base.retry_limit,
    )
    samples = complete(prompt, sampling, backend, cache)
    valid = [s.parsed for s in samples if s.valid]
    if not valid:
        raise ForecastError(
            f"no parseable forecast for dialogue {prompt.dialogue_id!r} "
            f"({n_samples} samples)"
        )
    return ForecastEstimate(
        dialogue_id=prompt.dialogue_id,
        task=prompt.task.value,
        value=float(np.mean(valid)),
        method_tag=method_tag or f"bot{n_samples}",
        n_used=len(valid),
    )


def estimate_funq_two_step(
    forecast_side: ForecastEstimate, world_side: ForecastEstimate
) -> ForecastEstimate:
    """Compose a false-uncertainty estimate as forecast-side minus world-side."""
    if forecast_side.dialogue_id != world_side.dialogue_id:
        raise ForecastError(
            f"dialogue mismatch: {forecast_side.dialogue_id!r} vs "
            f"{world_side.dialogue_id!r}"
        )
    for est in (forecast_side, world_side):
        if not 0.0 <= est.value <= 1.0:
            raise ForecastError(f"component estimate {est.value} outside [0, 1]")
    return ForecastEstimate(
        dialogue_id=forecast_side.dialogue_id,
        task=FUNQ_TASK,
        value=forecast_side.value - world_side.value,
        method_tag=f"two_step({forecast_side.method_tag},{world_side.method_tag})",
        n_used=min(forecast_side.n_used, world_side.n_used),
    )


def classify_belief(forecast: float) -> int:
    """Map a 10-point certainty to a binary belief: 1 iff above 5 of 10."""
    scaled = forecast * 10.0
    nearest = round(scaled)
    if not 1 <= nearest <= 10 or abs(scaled - nearest) > 1e-9:
        raise ForecastError(
            f"forecast {forecast} is not on the grid 0.1 .. 1.0"
        )
    return 1 if nearest > 5 else 0


def classification_metrics(predictions: list[int], labels: list[int]) -> dict[str, float]:
    """Accuracy and F1 over binary predictions; F1 is 0 when undefined."""
    if len(predictions) != len(labels):
        raise ForecastError(
            f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels"
        )
    if not predictions:
        raise ForecastError("cannot score an empty prediction list")
    for v in (*predictions, *labels):
        if v not in (0, 1):
            raise ForecastError(f"binary value expected, got {v!r}")
    pairs = list(zip(predictions, labels))
    tp = sum(1 for p, y in pairs if p == 1 and y == 1)
    fp = sum(1 for p, y in pairs if p == 1 and y == 0)
    fn = sum(1 for p, y in pairs if p == 0 and y == 1)
    accuracy = sum(1 for p, y in pairs if p == y) / len(pairs)
    denom = 2 * tp + fp + fn
    f1 = (2 * tp / denom) if denom > 0 else 0.0
    return {"accuracy": accuracy, "f1": f1}


def save_estimates(
    estimates: list[ForecastEstimate],
    path: str | Path,
    backend_id: str = "",
    seed: int | None = None,
) -> None:
    """Persist estimates as line-delimited records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for est in sorted(estimates, key=lambda e: (e.task, e.dialogue_id)):
            fh.write(
                json.dumps(
                    {
                        "dialogue_id": est.dialogue_id,
                        "task": est.task,
                        "method_tag": est.method_tag,
                        "value": est.value,
                        "n_used": est.n_used,
                        "backend_id": backend_id,
                        "seed": seed,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
