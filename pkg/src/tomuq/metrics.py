"""Evaluation mathematics: score decompositions and regression metrics.

The expected squared error of a probability forecast against a Bernoulli
outcome splits exactly into the outcome's own variance (aleatoric, the
world's irreducible randomness) and the squared gap between forecast and
outcome probability (epistemic, the forecaster's excess error).

Regression quality is reported as Pearson and Spearman correlation, mean
absolute error in percent probability, and out-of-sample explained
variance: one minus residual sum of squares over squared deviations from
the *training* mean.  Constant predictions at the training mean therefore
score exactly zero, and negative values mean "worse than predicting the
mean".  Results across several train/test splits are micro-averaged:
all pairs are pooled and each metric is computed once, with each squared
deviation in the explained-variance denominator using its own split's
training mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tomuq.errors import MetricError


@dataclass(frozen=True)
class BinaryOutcome:
    """A realized binary outcome, with its probability when known."""

    value: int
    outcome_probability: float | None = None

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise MetricError(f"outcome value must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class BrierDecomposition:
    expected_bs: float
    aleatoric: float
    epistemic: float


@dataclass(frozen=True)
class RegressionReport:
    pearson_r: float
    spearman_rho: float
    mae_percent: float
    r_squared: float
    n_test: int
    train_mean: float


def expected_brier(forecast: float, outcome_probability: float) -> BrierDecomposition:
    """Exact expectation of the squared forecast error over the outcome."""
    if not 0.0 <= forecast <= 1.0:
        raise MetricError(f"forecast must lie in [0, 1], got {forecast!r}")
    if not 0.0 <= outcome_probability <= 1.0:
        raise MetricError(
            f"outcome probability must lie in [0, 1], got {outcome_probability!r}"
        )
    p = outcome_probability
    aleatoric = p * (1.0 - p)
    epistemic = (forecast - p) ** 2
    expected_bs = p * (1.0 - forecast) ** 2 + (1.0 - p) * forecast**2
    return BrierDecomposition(
        expected_bs=expected_bs, aleatoric=aleatoric, epistemic=epistemic
    )


def _paired_arrays(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size:
        raise MetricError(f"length mismatch: {xs.size} vs {ys.size}")
    return xs, ys


def pearson(xs, ys) -> float:
    """Product-moment correlation; errors on constant inputs."""
    xs, ys = _paired_arrays(xs, ys)
    if xs.size < 2:
        raise MetricError("need at least two pairs")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    if sxx == 0.0 or syy == 0.0:
        raise MetricError("undefined correlation: constant input")
    return float(np.sum(dx * dy) / np.sqrt(sxx * syy))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j < arr.size and arr[order[j]] == arr[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # average of 1-based positions
        i = j
    return ranks


def spearman(xs, ys) -> float:
    """Rank correlation: Pearson over midrank-transformed inputs."""
    xs, ys = _paired_arrays(xs, ys)
    if xs.size < 2:
        raise MetricError("need at least two pairs")
    return pearson(average_ranks(xs), average_ranks(ys))


def mae_percent(preds, targets) -> float:
    """Mean absolute error scaled to percent probability."""
    preds, targets = _paired_arrays(preds, targets)
    if preds.size == 0:
        raise MetricError("need at least one pair")
    return float(np.mean(np.abs(preds - targets)) * 100.0)


def oos_r_squared(test_targets, preds, train_mean: float) -> float:
    """Explained variance relative to predicting the training mean."""
    targets, preds = _paired_arrays(test_targets, preds)
    if targets.size == 0:
        raise MetricError("empty test set")
    ss_tot = float(np.sum((targets - train_mean) ** 2))
    if ss_tot <= 0.0:
        raise MetricError("degenerate test variance")
    ss_res = float(np.sum((targets - preds) ** 2))
    return 1.0 - ss_res / ss_tot


def micro_average(
    per_split_results: list[tuple[list[float], list[float], float]],
    r2_train_mean: str = "split_local",
) -> RegressionReport:
    """Pool (target, prediction) pairs across splits and score once.

    Each split contributes (test targets, predictions, its training
    mean).  With ``r2_train_mean="global"`` the explained-variance
    denominator uses the average of the split means instead of each
    split's own.
    """
    if not per_split_results:
        raise MetricError("need at least one split")
    if r2_train_mean not in ("split_local", "global"):
        raise MetricError(f"unknown r2_train_mean mode {r2_train_mean!r}")
    all_targets: list[float] = []
    all_preds: list[float] = []
    ss_res = 0.0
    ss_tot = 0.0
    means = []
    global_mean = float(
        np.mean([train_mean for _, _, train_mean in per_split_results])
    )
    for targets, preds, train_mean in per_split_results:
        t, p = _paired_arrays(targets, preds)
        all_targets.extend(t.tolist())
        all_preds.extend(p.tolist())
        means.append(train_mean)
        center = train_mean if r2_train_mean == "split_local" else global_mean
        ss_res += float(np.sum((t - p) ** 2))
        ss_tot += float(np.sum((t - center) ** 2))
    if ss_tot <= 0.0:
        raise MetricError("degenerate test variance")
    return RegressionReport(
        pearson_r=pearson(all_preds, all_targets),
        spearman_rho=spearman(all_preds, all_targets),
        mae_percent=mae_percent(all_preds, all_targets),
        r_squared=1.0 - ss_res / ss_tot,
        n_test=len(all_targets),
        train_mean=float(np.mean(means)),
    )
