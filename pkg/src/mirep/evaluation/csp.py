"""Common-spatial-patterns baseline with a linear discriminant readout."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg

from ..errors import ConfigurationError
from ..signal.types import Trial


def _trial_cov(x: np.ndarray) -> np.ndarray:
    c = x @ x.T
    return c / np.trace(c)


def _class_cov(trials: list[Trial], label: int) -> np.ndarray:
    covs = [_trial_cov(t.x.astype(np.float64)) for t in trials if t.label == label]
    if not covs:
        raise ConfigurationError(f"no trials of class {label}")
    return np.mean(covs, axis=0)


def _regularize(cov: np.ndarray, name: str) -> np.ndarray:
    if np.linalg.cond(cov) > 1e12:
        warnings.warn(f"{name} covariance is near-singular, adding ridge")
        n_c = cov.shape[0]
        cov = cov + (1e-6 * np.trace(cov) / n_c) * np.eye(n_c)
    return cov


def csp_filters(train_trials: list[Trial], n_filters: int = 6) -> np.ndarray:
    """Spatial filters [n_c, n_filters] from the generalized eigenproblem.

    Solves sigma_1 w = lambda (sigma_1 + sigma_2) w; the returned columns are
    the n_filters/2 eigenvectors from each end of the spectrum and satisfy
    W.T (sigma_1 + sigma_2) W = I.
    """
    if n_filters % 2 != 0 or n_filters < 2:
        raise ConfigurationError(f"n_filters must be a positive even count, got {n_filters}")
    s1 = _regularize(_class_cov(train_trials, 1), "class 1")
    s0 = _regularize(_class_cov(train_trials, 0), "class 0")
    composite = _regularize(s0 + s1, "composite")
    n_c = composite.shape[0]
    if n_filters > n_c:
        raise ConfigurationError(
            f"n_filters {n_filters} exceeds channel count {n_c}"
        )
    eigvals, eigvecs = linalg.eigh(s1, composite)
    half = n_filters // 2
    keep = list(range(half)) + list(range(n_c - half, n_c))
    return eigvecs[:, keep]


def _log_variance(trials: list[Trial], w: np.ndarray) -> np.ndarray:
    feats = np.empty((len(trials), w.shape[1]))
    for i, t in enumerate(trials):
        filtered = w.T @ t.x.astype(np.float64)
        feats[i] = np.log(filtered.var(axis=1) + 1e-12)
    return feats


def csp_lda_baseline(train_trials: list[Trial], test_trials: list[Trial],
                     n_filters: int = 6) -> float:
    """Accuracy of CSP log-variance features under a linear discriminant."""
    w = csp_filters(train_trials, n_filters)
    x_train = _log_variance(train_trials, w)
    y_train = np.array([t.label for t in train_trials])
    x_test = _log_variance(test_trials, w)
    y_test = np.array([t.label for t in test_trials])

    mu0 = x_train[y_train == 0].mean(axis=0)
    mu1 = x_train[y_train == 1].mean(axis=0)
    centered = np.concatenate([
        x_train[y_train == 0] - mu0,
        x_train[y_train == 1] - mu1,
    ])
    pooled = centered.T @ centered / max(len(x_train) - 2, 1)
    pooled += 1e-9 * np.eye(pooled.shape[0])
    direction = np.linalg.solve(pooled, mu1 - mu0)
    threshold = direction @ (mu0 + mu1) / 2.0
    pred = (x_test @ direction > threshold).astype(int)
    return float((pred == y_test).mean())
