"""Per-trial preprocessing: bandpass, Laplacian re-reference, segmentation,
decimation.  Every function is pure and touches one trial at a time."""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from ..errors import ConfigurationError
from .types import Trial


def bandpass(trial: Trial, low: float = 4.0, high: float = 40.0) -> Trial:
    """Zero-phase 4th-order Butterworth bandpass.

    Forward-backward filtering doubles the effective order, giving well over
    40 dB of stop-band attenuation at half the low edge and 1.5x the high
    edge while keeping the pass band flat.
    """
    nyquist = trial.sample_rate / 2.0
    if not 0.0 < low < high < nyquist:
        raise ConfigurationError(
            f"band ({low}, {high}) Hz must sit inside (0, {nyquist}) Hz"
        )
    b, a = sps.butter(4, [low, high], btype="bandpass", fs=trial.sample_rate)
    return trial.with_x(sps.filtfilt(b, a, trial.x.astype(np.float64), axis=1))


def ring_neighbors(n_c: int, radius: int = 1) -> dict[int, tuple[int, ...]]:
    """Neighbor map for channels laid out on a ring."""
    if radius < 1:
        raise ConfigurationError(f"radius must be >= 1, got {radius}")
    out = {}
    for c in range(n_c):
        neigh = []
        for d in range(1, radius + 1):
            neigh.extend([(c - d) % n_c, (c + d) % n_c])
        out[c] = tuple(dict.fromkeys(neigh))
    return out


def laplacian_reference(trial: Trial,
                        neighbors: dict[int, tuple[int, ...]]) -> Trial:
    """Subtract the neighbor mean from each referenced channel."""
    out = trial.x.astype(np.float64).copy()
    for c, neigh in neighbors.items():
        if len(neigh) == 0:
            raise ConfigurationError(f"channel {c} has an empty neighbor set")
        if not 0 <= c < trial.n_c or any(not 0 <= n < trial.n_c for n in neigh):
            raise ConfigurationError(
                f"neighbor map references channels outside [0, {trial.n_c})"
            )
        out[c] = trial.x[c] - trial.x[list(neigh)].mean(axis=0)
    return trial.with_x(out)


def segment_baseline(record: Trial, rest_len: float, task_len: float,
                     trim: float = 0.5) -> Trial:
    """Cut the task window out of a rest-plus-task record.

    The task segment loses ``trim`` seconds at both ends and the per-channel
    mean of the rest segment is subtracted from it.
    """
    if task_len <= 2 * trim:
        raise ConfigurationError(
            f"task_len {task_len} s must exceed twice the trim {trim} s"
        )
    fs = record.sample_rate
    rest_n = int(round(rest_len * fs))
    task_n = int(round(task_len * fs))
    trim_n = int(round(trim * fs))
    if rest_n + task_n > record.n_t:
        raise ConfigurationError(
            f"record has {record.n_t} samples, need {rest_n + task_n} "
            f"for rest {rest_len} s + task {task_len} s"
        )
    baseline = record.x[:, :rest_n].mean(axis=1, keepdims=True)
    task = record.x[:, rest_n + trim_n: rest_n + task_n - trim_n]
    return record.with_x(task - baseline)


def downsample(trial: Trial, target_rate: float) -> Trial:
    """Integer-factor decimation with zero-phase anti-alias filtering."""
    if target_rate == trial.sample_rate:
        return trial.with_x(trial.x.copy())
    ratio = trial.sample_rate / target_rate
    q = int(round(ratio))
    if abs(ratio - q) > 1e-9 or q < 1:
        raise ConfigurationError(
            f"target rate {target_rate} Hz must divide the sample rate "
            f"{trial.sample_rate} Hz"
        )
    out = sps.decimate(trial.x.astype(np.float64), q, ftype="iir",
                       zero_phase=True, axis=1)
    return trial.with_x(out, sample_rate=target_rate)
