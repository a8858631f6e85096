"""Error decomposition for repeated estimates of one fixed quantity."""

from __future__ import annotations

import numpy as np

from tomuq.errors import FitError


def mse_decomposition(estimates: list[float], target: float) -> dict[str, float]:
    """Split mean squared error into variance and squared bias.

    Uses population formulas, so mse == variance + bias_sq holds exactly.
    """
    if len(estimates) == 0:
        raise FitError("cannot decompose an empty list of estimates")
    arr = np.asarray(estimates, dtype=np.float64)
    mean = arr.mean()
    variance = float(np.mean((arr - mean) ** 2))
    bias_sq = float((mean - target) ** 2)
    mse = float(np.mean((arr - target) ** 2))
    return {"variance": variance, "bias_sq": bias_sq, "mse": mse}
