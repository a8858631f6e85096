"""Scaling maps and regression heads for correcting raw forecasts."""

from tomuq.regress.bias_variance import mse_decomposition
from tomuq.regress.forest import (
    RandomForestRegressor,
    tree_depth,
    tree_leaf_count,
    tree_predict,
)
from tomuq.regress.heads import (
    HEAD_KINDS,
    LinearHead,
    RegressionHead,
    ReluNetHead,
    SGD_DEFAULTS,
    concat_features,
    fit_head,
    fit_joint_head,
    load_head,
    predict_head,
    save_head,
)
from tomuq.regress.scaling import (
    ScalingParams,
    apply_linear_scaling,
    apply_platt_scaling,
    apply_scaling,
    expit,
    fit_linear_scaling,
    fit_platt_scaling,
    load_scaling,
    logit,
    save_scaling,
)

__all__ = [
    "HEAD_KINDS",
    "LinearHead",
    "RandomForestRegressor",
    "RegressionHead",
    "ReluNetHead",
    "SGD_DEFAULTS",
    "ScalingParams",
    "apply_linear_scaling",
    "apply_platt_scaling",
    "apply_scaling",
    "concat_features",
    "expit",
    "fit_head",
    "fit_joint_head",
    "fit_linear_scaling",
    "fit_platt_scaling",
    "load_head",
    "load_scaling",
    "logit",
    "mse_decomposition",
    "predict_head",
    "save_head",
    "save_scaling",
    "tree_depth",
    "tree_leaf_count",
    "tree_predict",
]
