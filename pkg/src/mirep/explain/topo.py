"""Channel-level relevance summaries for topographic plots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .lrp import RelevanceMap


@dataclass
class TopoVector:
    """One scalar per channel, min-max normalized to [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ConfigurationError(
                f"topo vector must be 1-D, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("topo vector contains non-finite values")
        if self.values.min() < 0 or self.values.max() > 1:
            raise ConfigurationError("topo vector values must lie in [0, 1]")


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Map to [0, 1]; a constant vector becomes all 0.5."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def topographic_relevance(maps: list[RelevanceMap]) -> TopoVector:
    """Average relevance over time, then over trials, then normalize."""
    if not maps:
        raise ConfigurationError("need at least one relevance map")
    shapes = {m.scores.shape for m in maps}
    if len(shapes) > 1:
        raise ConfigurationError(f"inconsistent map shapes {sorted(shapes)}")
    per_trial = np.stack([m.scores.mean(axis=1) for m in maps])
    return TopoVector(values=minmax_normalize(per_trial.mean(axis=0)))
