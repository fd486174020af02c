"""Synthetic multi-subject cohort with a lateral band-power class effect."""

from __future__ import annotations

import numpy as np

from .types import CohortSpec, Trial


def _band_mask(n_t: int, sample_rate: float, band: tuple[float, float],
               taper_hz: float = 1.0) -> np.ndarray:
    """Raised-cosine band mask on the rfft grid."""
    freqs = np.fft.rfftfreq(n_t, d=1.0 / sample_rate)
    lo, hi = band
    mask = np.zeros_like(freqs)
    inside = (freqs >= lo) & (freqs <= hi)
    mask[inside] = 1.0
    lo_edge = (freqs >= lo - taper_hz) & (freqs < lo)
    mask[lo_edge] = 0.5 * (1 + np.cos(np.pi * (lo - freqs[lo_edge]) / taper_hz))
    hi_edge = (freqs > hi) & (freqs <= hi + taper_hz)
    mask[hi_edge] = 0.5 * (1 + np.cos(np.pi * (freqs[hi_edge] - hi) / taper_hz))
    return mask


def _tilt_gain(n_t: int, sample_rate: float, tilt: float,
               pivot_hz: float) -> np.ndarray:
    """Power-law spectral gain (f / pivot)^tilt, flattened below 1 Hz."""
    freqs = np.fft.rfftfreq(n_t, d=1.0 / sample_rate)
    return ((freqs + 1.0) / pivot_hz) ** tilt


def _random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def generate_cohort(spec: CohortSpec) -> list[Trial]:
    """Draw every trial for every subject of the cohort.

    Trials are ordered by (subject, class, trial index) and the whole cohort
    is a pure function of the spec, so identical specs give bit-identical
    cohorts.
    """
    rng = np.random.default_rng(spec.seed)
    mask = _band_mask(spec.n_t, spec.sample_rate, spec.class_band)
    pivot = 0.5 * (spec.class_band[0] + spec.class_band[1])

    # per-channel band gain for each class: class k is loud on groups[k]
    gains = np.ones((2, spec.n_c))
    for k in (0, 1):
        gains[k, list(spec.groups[k])] = spec.class_gain
        gains[k, list(spec.groups[1 - k])] = 1.0 / spec.class_gain

    trials: list[Trial] = []
    for subject in range(spec.num_subjects):
        tilt = rng.uniform(-spec.tilt_range, spec.tilt_range)
        mixing = _random_orthogonal(rng, spec.n_c)
        noise_scale = spec.noise_floor * rng.uniform(0.5, 1.5)
        tilt_gain = _tilt_gain(spec.n_t, spec.sample_rate, tilt, pivot)
        mix = (1.0 - spec.mixing_strength) * np.eye(spec.n_c) \
            + spec.mixing_strength * mixing
        for label in (0, 1):
            for _ in range(spec.trials_per_class):
                rhythm = rng.standard_normal((spec.n_c, spec.n_t))
                rhythm = np.fft.irfft(np.fft.rfft(rhythm, axis=1) * mask,
                                      n=spec.n_t, axis=1)
                rhythm /= rhythm.std(axis=1, keepdims=True) + 1e-12
                noise = noise_scale * rng.standard_normal((spec.n_c, spec.n_t))
                x = gains[label][:, None] * rhythm + noise
                x = np.fft.irfft(np.fft.rfft(x, axis=1) * tilt_gain,
                                 n=spec.n_t, axis=1)
                x = mix @ x
                y = np.zeros(2, dtype=np.float32)
                y[label] = 1.0
                trials.append(Trial(x=x.astype(np.float32), y=y,
                                    subject_id=subject,
                                    sample_rate=spec.sample_rate))
    return trials
