"""Welch power spectral density and band-power summaries."""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from ..errors import ConfigurationError
from .types import PSD, Trial


def welch_psd(trial: Trial, segment_len: int | None = None,
              overlap: float = 0.5) -> PSD:
    """Hann-windowed averaged periodogram per channel.

    ``segment_len`` defaults to one second of samples; frequency resolution
    is sample_rate / segment_len.
    """
    if segment_len is None:
        segment_len = int(round(trial.sample_rate))
    segment_len = int(segment_len)
    if segment_len < 8:
        raise ConfigurationError(f"segment_len must be >= 8 samples, got {segment_len}")
    if segment_len > trial.n_t:
        raise ConfigurationError(
            f"segment_len {segment_len} exceeds trial length {trial.n_t}"
        )
    if not 0.0 <= overlap < 1.0:
        raise ConfigurationError(f"overlap must lie in [0, 1), got {overlap}")
    freqs, power = sps.welch(
        trial.x.astype(np.float64), fs=trial.sample_rate, window="hann",
        nperseg=segment_len, noverlap=int(segment_len * overlap),
        detrend=False, axis=1,
    )
    return PSD(frequencies=freqs, power=power)


def band_power(psd: PSD, low: float, high: float) -> np.ndarray:
    """Mean power per channel over [low, high] Hz."""
    sel = (psd.frequencies >= low) & (psd.frequencies <= high)
    if not sel.any():
        raise ConfigurationError(
            f"band ({low}, {high}) Hz contains no grid frequencies"
        )
    return psd.power[:, sel].mean(axis=1)
