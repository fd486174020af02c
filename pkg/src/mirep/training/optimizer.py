"""Rectified-Adam optimizer with the variance-rectification warmup.

While the rectification term rho_t stays <= 4 (the first four steps at
beta2 = 0.999) the update falls back to plain bias-corrected momentum; once
rho_t exceeds 4 the adaptive step with the rectification factor applies.
"""

from __future__ import annotations

import numpy as np

from ..diffcore.tensor import Parameter
from ..errors import ConfigurationError, NumericAbort


class OptimizerState:
    """First/second moment buffers per parameter plus the shared step count."""

    def __init__(self, params: list[Parameter], *, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ConfigurationError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step = 0
        self.m = {p.name: np.zeros_like(p.data, dtype=np.float64) for p in params}
        self.v = {p.name: np.zeros_like(p.data, dtype=np.float64) for p in params}
        self.rho_inf = 2.0 / (1.0 - beta2) - 1.0


def optimizer_step(params: list[Parameter], grads: list[np.ndarray] | None,
                   state: OptimizerState, lr: float) -> None:
    """One update over all parameters; ``grads=None`` reads Parameter.grad."""
    if grads is None:
        grads = []
        for p in params:
            if p.grad is None:
                raise NumericAbort(f"parameter {p.name} has no gradient")
            grads.append(p.grad)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    rho = state.rho_inf - 2.0 * t * b2 ** t / (1.0 - b2 ** t)
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    rectified = rho > 4.0
    if rectified:
        r = np.sqrt(((rho - 4.0) * (rho - 2.0) * state.rho_inf)
                    / ((state.rho_inf - 4.0) * (state.rho_inf - 2.0) * rho))
    for p, g in zip(params, grads):
        if not np.all(np.isfinite(g)):
            raise NumericAbort(f"non-finite gradient for parameter {p.name}")
        g = g.astype(np.float64, copy=False)
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bias1
        if rectified:
            denom = np.sqrt(v / bias2) + state.eps
            update = lr * r * m_hat / denom
        else:
            update = lr * m_hat
        p.tensor.data = (p.data - update).astype(p.data.dtype)


def lr_at_epoch(base_lr: float, decay: float, epoch: int) -> float:
    """Exactly geometric schedule base_lr * decay^epoch."""
    return base_lr * decay ** epoch
