"""
Mridangam Stroke Transcriber - Neural Network Package

From-scratch feedforward classifier: layer specs, forward/backward passes,
Adam and the early-stopping training loop.
"""

from .layers import (
    Activation,
    LayerSpec,
    NetworkError,
    build_architecture,
    reference_architecture,
    param_count,
    parse_dims,
)
from .network import (
    Network,
    backward,
    cross_entropy,
    evaluate_network,
    forward,
    init_network,
    predict,
    predict_batch,
    softmax,
)
from .optimizer import AdamState, adam_step
from .training import TrainConfig, TrainHistory, TrainingError, accuracy, train

__all__ = [
    "Activation",
    "LayerSpec",
    "NetworkError",
    "build_architecture",
    "reference_architecture",
    "param_count",
    "parse_dims",
    "Network",
    "backward",
    "cross_entropy",
    "evaluate_network",
    "forward",
    "init_network",
    "predict",
    "predict_batch",
    "softmax",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "TrainHistory",
    "TrainingError",
    "accuracy",
    "train",
]
