"""Domain types for multi-channel trials and their spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass
class Trial:
    """One multi-channel recording segment with its class and subject tags.

    ``x`` is [n_c, n_t] in arbitrary amplitude units; ``y`` is a one-hot
    vector over the two classes; ``subject_id`` tags the recording domain.
    """

    x: np.ndarray
    y: np.ndarray
    subject_id: int
    sample_rate: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float32)
        self.y = np.asarray(self.y, dtype=np.float32)
        if self.x.ndim != 2 or self.x.shape[0] < 2:
            raise ConfigurationError(
                f"trial needs [n_c >= 2, n_t] samples, got shape {self.x.shape}"
            )
        if self.x.shape[1] < self.sample_rate:
            raise ConfigurationError(
                f"trial shorter than 1 s: {self.x.shape[1]} samples at "
                f"{self.sample_rate} Hz"
            )
        if self.y.shape != (2,) or sorted(self.y.tolist()) != [0.0, 1.0]:
            raise ConfigurationError(f"y must be one-hot of length 2, got {self.y}")
        if self.subject_id < 0:
            raise ConfigurationError(f"subject_id must be >= 0, got {self.subject_id}")

    @property
    def n_c(self) -> int:
        return self.x.shape[0]

    @property
    def n_t(self) -> int:
        return self.x.shape[1]

    @property
    def label(self) -> int:
        return int(self.y.argmax())

    def with_x(self, x: np.ndarray, sample_rate: float | None = None) -> "Trial":
        """Copy of this trial with new samples (class/subject tags kept)."""
        return Trial(x=x, y=self.y.copy(), subject_id=self.subject_id,
                     sample_rate=self.sample_rate if sample_rate is None else sample_rate)


@dataclass
class CohortSpec:
    """Recipe for a synthetic multi-subject cohort with a lateral class effect.

    The class signal is band-limited oscillation power: trials of class k
    carry amplified power on ``groups[k]`` and attenuated power on the other
    group, identically for every subject.  Each subject adds a fixed random
    spectral tilt, channel mixing, and noise level, which is the
    between-subject shift the training objective is meant to survive.
    """

    num_subjects: int = 8
    trials_per_class: int = 60
    n_c: int = 8
    n_t: int = 80
    sample_rate: float = 64.0
    class_band: tuple[float, float] = (8.0, 13.0)
    class_gain: float = 2.0
    tilt_range: float = 0.4
    mixing_strength: float = 0.2
    noise_floor: float = 1.0
    seed: int = 0
    groups: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def __post_init__(self):
        if self.n_c < 2:
            raise ConfigurationError(f"need at least 2 channels, got {self.n_c}")
        lo, hi = self.class_band
        if not 0.0 < lo < hi < self.sample_rate / 2:
            raise ConfigurationError(
                f"class band {self.class_band} must sit inside "
                f"(0, {self.sample_rate / 2}) Hz"
            )
        if self.groups is None:
            # halves minus the two midline channels 0 and n_c // 2
            half = self.n_c // 2
            left = tuple(c for c in range(1, half))
            right = tuple(c for c in range(half + 1, self.n_c))
            if not left or not right:
                left, right = (0,), (self.n_c - 1,)
            self.groups = (left, right)
        flat = [c for g in self.groups for c in g]
        if len(set(flat)) != len(flat) or any(not 0 <= c < self.n_c for c in flat):
            raise ConfigurationError(f"invalid channel groups {self.groups}")


@dataclass
class PSD:
    """Per-channel power spectral density on a shared frequency grid."""

    frequencies: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        self.power = np.asarray(self.power, dtype=np.float64)
        if np.any(np.diff(self.frequencies) <= 0):
            raise ConfigurationError("frequency grid must be strictly increasing")
        if np.any(self.power < 0):
            raise ConfigurationError("PSD power must be nonnegative")
