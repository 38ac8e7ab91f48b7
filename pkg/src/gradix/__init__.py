"""Physics-informed neural networks for radiative transfer in graded-index media."""

from . import autodiff, metrics, network, rte, sampling, training
from .errors import (
    AssumptionError,
    DomainError,
    GradixError,
    NonFiniteError,
    SingularityError,
    TrainingAbort,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "DomainError",
    "GradixError",
    "NonFiniteError",
    "SingularityError",
    "TrainingAbort",
    "UsageError",
    "autodiff",
    "metrics",
    "network",
    "rte",
    "sampling",
    "training",
]
