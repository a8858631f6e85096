"""Regression heads over prompt embeddings.

Heads map a feature vector to an unconstrained real prediction (no output
clipping; clipping belongs to explicitly configured scaling).  The linear
and ReLU-network heads train by mini-batch SGD on mean squared error; the
forest head bags regression trees.  All fitting is seeded and
deterministic; fitted heads are immutable for prediction purposes and can
be serialized to a versioned JSON format that reloads exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tomuq.errors import FitError
from tomuq.gateway.backends import FeatureVector
from tomuq.regress.forest import RandomForestRegressor

HEAD_KINDS = ("linear", "relu_net", "random_forest", "random_forest_joint")

SGD_DEFAULTS = {"learning_rate": 1e-2, "batch_size": 32, "epochs": 200}
RELU_HIDDEN_WIDTH = 100


class LinearHead:
    """w . x + b, trained by mini-batch SGD from zero init."""

    def __init__(self, input_dim: int):
        self.weights = np.zeros(input_dim)
        self.bias = 0.0

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        seed: int,
        learning_rate: float,
        batch_size: int,
        epochs: int,
    ) -> "LinearHead":
        rng = np.random.default_rng(seed)
        n = y.size
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                Xb, yb = X[idx], y[idx]
                residual = Xb @ self.weights + self.bias - yb
                grad_w = 2.0 * (Xb.T @ residual) / idx.size
                grad_b = 2.0 * residual.mean()
                self.weights -= learning_rate * grad_w
                self.bias -= learning_rate * grad_b
        return self


class ReluNetHead:
    """One hidden ReLU layer, then a linear readout.

    Parameters live in ``params`` as W1 (hidden, in), b1, w2, b2.
    :meth:`loss_and_gradients` exposes analytic gradients of the mean
    squared error so they can be checked against finite differences.
    """

    def __init__(self, input_dim: int, hidden_width: int = RELU_HIDDEN_WIDTH, seed: int = 0):
        rng = np.random.default_rng(seed)
        in_scale = 1.0 / np.sqrt(input_dim)
        hid_scale = 1.0 / np.sqrt(hidden_width)
        self.params = {
            "W1": rng.uniform(-in_scale, in_scale, size=(hidden_width, input_dim)),
            "b1": np.zeros(hidden_width),
            "w2": rng.uniform(-hid_scale, hid_scale, size=hidden_width),
            "b2": np.zeros(1),
        }

    def predict(self, X: np.ndarray) -> np.ndarray:
        pre = X @ self.params["W1"].T + self.params["b1"]
        hidden = np.maximum(pre, 0.0)
        return hidden @ self.params["w2"] + self.params["b2"][0]

    def loss_and_gradients(
        self, X: np.ndarray, y: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        n = y.size
        pre = X @ self.params["W1"].T + self.params["b1"]
        hidden = np.maximum(pre, 0.0)
        out = hidden @ self.params["w2"] + self.params["b2"][0]
        residual = out - y
        loss = float(np.mean(residual**2))
        d_out = 2.0 * residual / n
        grads = {
            "w2": hidden.T @ d_out,
            "b2": np.array([d_out.sum()]),
        }
        d_hidden = np.outer(d_out, self.params["w2"])
        d_pre = d_hidden * (pre > 0.0)
        grads["W1"] = d_pre.T @ X
        grads["b1"] = d_pre.sum(axis=0)
        return loss, grads

    def fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        seed: int,
        learning_rate: float,
        batch_size: int,
        epochs: int,
    ) -> "ReluNetHead":
        rng = np.random.default_rng(seed)
        n = y.size
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                _, grads = self.loss_and_gradients(X[idx], y[idx])
                for name, grad in grads.items():
                    self.params[name] -= learning_rate * grad
        return self


@dataclass
class RegressionHead:
    """A fitted head: kind, the underlying model, and its provenance."""

    kind: str
    model: object
    input_dim: int
    rng_seed: int
    config: dict = field(default_factory=dict)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise FitError(
                f"feature dim {X.shape[1]} does not match head dim {self.input_dim}"
            )
        return np.asarray(self.model.predict(X), dtype=np.float64)


def _feature_matrix(features: list[FeatureVector]) -> np.ndarray:
    dims = {f.dim for f in features}
    if len(dims) != 1:
        raise FitError(f"feature dimensions differ: {sorted(dims)}")
    return np.stack([f.values for f in features]).astype(np.float64)


def fit_head(
    features: list[FeatureVector],
    targets: list[float],
    kind: str,
    seed: int,
    **config,
) -> RegressionHead:
    """Fit one regression head on (feature vector, target) pairs."""
    if kind not in HEAD_KINDS:
        raise FitError(f"unknown head kind {kind!r}")
    if len(features) != len(targets):
        raise FitError(
            f"{len(features)} feature vectors vs {len(targets)} targets"
        )
    if len(features) < 2:
        raise FitError("need at least two training examples")
    X = _feature_matrix(features)
    y = np.asarray(targets, dtype=np.float64)

    if kind == "linear":
        settings = {**SGD_DEFAULTS, **config}
        model = LinearHead(X.shape[1]).fit(X, y, seed=seed, **settings)
    elif kind == "relu_net":
        settings = {**SGD_DEFAULTS, **config}
        width = settings.pop("hidden_width", RELU_HIDDEN_WIDTH)
        model = ReluNetHead(X.shape[1], hidden_width=width, seed=seed).fit(
            X, y, seed=seed + 1, **settings
        )
        settings["hidden_width"] = width
    else:  # random_forest / random_forest_joint
        settings = {
            "n_trees": config.get("n_trees", 100),
            "max_depth": config.get("max_depth", 5),
        }
        model = RandomForestRegressor(seed=seed, **settings).fit(X, y)
    return RegressionHead(
        kind=kind, model=model, input_dim=X.shape[1], rng_seed=seed, config=settings
    )


def predict_head(head: RegressionHead, feature: FeatureVector) -> float:
    """Deterministic, unclipped prediction for one feature vector."""
    if feature.dim != head.input_dim:
        raise FitError(
            f"feature dim {feature.dim} does not match head dim {head.input_dim}"
        )
    return float(head.predict_batch(feature.values[None, :])[0])


def concat_features(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    return FeatureVector(
        values=np.concatenate([a.values, b.values]),
        dim=a.dim + b.dim,
        backend_id=a.backend_id,
    )


def fit_joint_head(
    features_forecast_side: list[FeatureVector],
    features_world_side: list[FeatureVector],
    fun_targets: list[float],
    seed: int,
    **config,
) -> RegressionHead:
    """Forest over concatenated prompt embeddings, predicting false
    uncertainty directly."""
    if not (
        len(features_forecast_side) == len(features_world_side) == len(fun_targets)
    ):
        raise FitError(
            "misaligned joint inputs: "
            f"{len(features_forecast_side)} forecast-side, "
            f"{len(features_world_side)} world-side, {len(fun_targets)} targets"
        )
    joined = [
        concat_features(a, b)
        for a, b in zip(features_forecast_side, features_world_side)
    ]
    return fit_head(joined, fun_targets, "random_forest_joint", seed, **config)


def _array_to_json(value):
    return value.tolist() if isinstance(value, np.ndarray) else value


def save_head(head: RegressionHead, path: str | Path) -> None:
    """Write a versioned JSON snapshot sufficient for exact reload."""
    payload = {
        "format_version": 1,
        "kind": head.kind,
        "input_dim": head.input_dim,
        "rng_seed": head.rng_seed,
        "config": head.config,
    }
    if head.kind == "linear":
        payload["params"] = {
            "weights": head.model.weights.tolist(),
            "bias": head.model.bias,
        }
    elif head.kind == "relu_net":
        payload["params"] = {k: _array_to_json(v) for k, v in head.model.params.items()}
    else:
        payload["params"] = {
            "trees": head.model.trees,
            "n_trees": head.model.n_trees,
            "max_depth": head.model.max_depth,
        }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_head(path: str | Path) -> RegressionHead:
    obj = json.loads(Path(path).read_text())
    if obj.get("format_version") != 1:
        raise FitError(f"unsupported head format {obj.get('format_version')!r}")
    kind = obj["kind"]
    params = obj["params"]
    if kind == "linear":
        model = LinearHead(obj["input_dim"])
        model.weights = np.asarray(params["weights"], dtype=np.float64)
        model.bias = float(params["bias"])
    elif kind == "relu_net":
        model = ReluNetHead(
            obj["input_dim"],
            hidden_width=obj["config"].get("hidden_width", RELU_HIDDEN_WIDTH),
            seed=obj["rng_seed"],
        )
        model.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    elif kind in ("random_forest", "random_forest_joint"):
        model = RandomForestRegressor(
            n_trees=params["n_trees"], max_depth=params["max_depth"], seed=obj["rng_seed"]
        )
        model.trees = params["trees"]
    else:
        raise FitError(f"unknown head kind {kind!r}")
    return RegressionHead(
        kind=kind,
        model=model,
        input_dim=obj["input_dim"],
        rng_seed=obj["rng_seed"],
        config=obj["config"],
    )
