"""Synthetic cohort generation, preprocessing chain, spectra, trial-set I/O."""

from .types import PSD, CohortSpec, Trial
from .synth import generate_cohort
from .preprocess import (
    bandpass,
    downsample,
    laplacian_reference,
    ring_neighbors,
    segment_baseline,
)
from .psd import band_power, welch_psd
from .trialset import read_trialset, write_trialset

__all__ = [
    "PSD", "CohortSpec", "Trial", "generate_cohort", "bandpass", "downsample",
    "laplacian_reference", "ring_neighbors", "segment_baseline", "band_power",
    "welch_psd", "read_trialset", "write_trialset",
]
