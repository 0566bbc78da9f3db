"""From-scratch regression networks: MLP, CNN, CNN-MLP and MLP-CNN."""

import numpy as np

from .layers import ConvSame, Dense, Flatten, FullExtentConv, ReLU, SelfCorrelation, Wrap
from .model import (
    KINDS,
    MODEL_KIND,
    ModelArch,
    NetError,
    NetParams,
    NeuralRegressor,
    TrainConfig,
    TrainingDiverged,
    forward,
    glorot_init,
    load_params,
    loss_and_grad,
    network,
    params_from_bytes,
    params_to_bytes,
    predict,
    save_params,
    train,
)


def self_correlation(v):
    """Outer product of a vector with itself."""
    v = np.asarray(v, dtype=float).ravel()
    return np.outer(v, v)


def wrap_to_matrix(v, side: int):
    """Row-major reshape of a side*side vector."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != side * side:
        raise NetError(f"cannot wrap {v.size} values into a {side}x{side} matrix")
    return v.reshape(side, side)


__all__ = [
    "ConvSame", "Dense", "Flatten", "FullExtentConv", "ReLU", "SelfCorrelation", "Wrap",
    "KINDS", "MODEL_KIND", "ModelArch", "NetError", "NetParams", "NeuralRegressor",
    "TrainConfig", "TrainingDiverged", "forward", "glorot_init", "load_params",
    "loss_and_grad", "network", "params_from_bytes", "params_to_bytes", "predict",
    "save_params", "self_correlation", "train", "wrap_to_matrix",
]
