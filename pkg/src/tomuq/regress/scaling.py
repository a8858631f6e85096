"""Post-hoc affine correction of forecasts.

Linear scaling fits target ~ slope * estimate + intercept by ordinary
least squares (normal equations) and clips predictions into the output
range.  Logit-space scaling fits the same line between logit-transformed
estimates and targets, with both sides clamped away from {0, 1} first,
and maps back through the logistic function, so outputs stay in (0, 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tomuq.errors import FitError

DEFAULT_EPSILON = 1e-3


def expit(x: float) -> float:
    """Numerically stable logistic function."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def logit(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise FitError(f"logit needs p in (0, 1), got {p!r}")
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class ScalingParams:
    """Fitted affine correction: slope, intercept, and how to apply them."""

    slope: float
    intercept: float
    kind: str  # "linear" or "platt"
    output_range: tuple[float, float] = (0.0, 1.0)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "platt"):
            raise FitError(f"unknown scaling kind {self.kind!r}")
        lo, hi = self.output_range
        if not lo < hi:
            raise FitError(f"output range must satisfy lo < hi, got {self.output_range}")
        if not 0.0 < self.epsilon < 0.5:
            raise FitError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")


def _ols_line(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    """Exact simple-regression solution of the normal equations."""
    if xs.size < 2:
        raise FitError("need at least two pairs to fit a scaling line")
    x_mean = xs.mean()
    y_mean = ys.mean()
    sxx = float(np.sum((xs - x_mean) ** 2))
    if sxx <= 0.0:
        raise FitError("degenerate design: all inputs identical")
    slope = float(np.sum((xs - x_mean) * (ys - y_mean)) / sxx)
    intercept = float(y_mean - slope * x_mean)
    return slope, intercept


def fit_linear_scaling(
    pairs: list[tuple[float, float]],
    output_range: tuple[float, float] = (0.0, 1.0),
) -> ScalingParams:
    """Least-squares line from raw estimates to targets (fit unclipped)."""
    xs = np.asarray([p[0] for p in pairs], dtype=np.float64)
    ys = np.asarray([p[1] for p in pairs], dtype=np.float64)
    slope, intercept = _ols_line(xs, ys)
    return ScalingParams(slope=slope, intercept=intercept, kind="linear", output_range=output_range)


def apply_linear_scaling(params: ScalingParams, estimate: float) -> float:
    if params.kind != "linear":
        raise FitError(f"expected linear params, got {params.kind!r}")
    lo, hi = params.output_range
    return float(np.clip(params.slope * estimate + params.intercept, lo, hi))


def fit_platt_scaling(
    pairs: list[tuple[float, float]],
    epsilon: float = DEFAULT_EPSILON,
) -> ScalingParams:
    """Least-squares line in logit space, both sides clamped to [eps, 1-eps]."""
    xs = np.asarray([p[0] for p in pairs], dtype=np.float64)
    ys = np.asarray([p[1] for p in pairs], dtype=np.float64)
    xs = np.clip(xs, epsilon, 1.0 - epsilon)
    ys = np.clip(ys, epsilon, 1.0 - epsilon)
    logit_xs = np.log(xs / (1.0 - xs))
    logit_ys = np.log(ys / (1.0 - ys))
    slope, intercept = _ols_line(logit_xs, logit_ys)
    return ScalingParams(slope=slope, intercept=intercept, kind="platt", epsilon=epsilon)


def apply_platt_scaling(params: ScalingParams, estimate: float) -> float:
    if params.kind != "platt":
        raise FitError(f"expected platt params, got {params.kind!r}")
    clamped = min(max(estimate, params.epsilon), 1.0 - params.epsilon)
    return expit(params.slope * logit(clamped) + params.intercept)


def apply_scaling(params: ScalingParams, estimate: float) -> float:
    if params.kind == "linear":
        return apply_linear_scaling(params, estimate)
    return apply_platt_scaling(params, estimate)


def save_scaling(params: ScalingParams, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "format_version": 1,
                "kind": params.kind,
                "slope": params.slope,
                "intercept": params.intercept,
                "output_range": list(params.output_range),
                "epsilon": params.epsilon,
            },
            sort_keys=True,
        )
    )


def load_scaling(path: str | Path) -> ScalingParams:
    obj = json.loads(Path(path).read_text())
    if obj.get("format_version") != 1:
        raise FitError(f"unsupported scaling format {obj.get('format_version')!r}")
    return ScalingParams(
        slope=obj["slope"],
        intercept=obj["intercept"],
        kind=obj["kind"],
        output_range=tuple(obj["output_range"]),
        epsilon=obj["epsilon"],
    )
