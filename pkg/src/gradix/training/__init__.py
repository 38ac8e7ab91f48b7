"""Losses, optimizers and training drivers."""

from .drivers import (
    EnsembleConfig,
    EnsembleResult,
    OptimizerConfig,
    TrainResult,
    ensemble_train,
    input_scaling,
    train_forward,
    train_inverse,
)
from .loss import LossConfig, PinnLoss, loss_forward, loss_inverse
from .optim import AdamConfig, LbfgsConfig, OptimResult, adam_minimize, lbfgs_minimize

__all__ = [
    "AdamConfig",
    "EnsembleConfig",
    "EnsembleResult",
    "LbfgsConfig",
    "LossConfig",
    "OptimResult",
    "OptimizerConfig",
    "PinnLoss",
    "TrainResult",
    "adam_minimize",
    "ensemble_train",
    "input_scaling",
    "lbfgs_minimize",
    "loss_forward",
    "loss_inverse",
    "train_forward",
    "train_inverse",
]
