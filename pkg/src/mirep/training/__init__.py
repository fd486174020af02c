"""Composite objective, RAdam optimizer, minibatching, and the fit loop."""

from .optimizer import OptimizerState, lr_at_epoch, optimizer_step
from .loop import (
    EpochRecord,
    FitResult,
    History,
    LossWeights,
    StepRecord,
    TrainConfig,
    evaluate,
    fit,
    make_minibatches,
    total_objective,
    write_history_csv,
)

__all__ = [
    "OptimizerState", "lr_at_epoch", "optimizer_step", "EpochRecord",
    "FitResult", "History", "LossWeights", "StepRecord", "TrainConfig",
    "evaluate", "fit", "make_minibatches", "total_objective",
    "write_history_csv",
]
