"""Epsilon-rule relevance propagation along the classification path.

Relevance starts at the chosen logit and is redistributed layer by layer
with the stabilized proportional rule R_i = sum_j x_i w_ij / (z_j +
eps*sign(z_j)) R_j.  Linear layers reuse the autodiff transpose (the
gradient of <z, s> with respect to x is exactly sum_j w_ij s_j), so the
relevance pass shares its convolution arithmetic with training.  Batch
normalization is folded into the preceding linear map using its eval-mode
affine form; ELU and dropout pass relevance through unchanged; max-pooling
routes relevance to the winning input; the class-irrelevant half of the
split receives exactly zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..diffcore import DiffTensor, Tape, as_tensor, backward, ops
from ..diffcore.layers import (BatchNorm, Conv2D, Dense, DepthwiseConv2D,
                               Dropout, ELU, MaxPool2D, SeparableConv2D)
from ..errors import ConfigurationError
from ..model import EncoderStack
from ..signal.types import Trial


@dataclass
class RelevanceMap:
    """Signed per-sample relevance for one trial and one target class."""

    scores: np.ndarray       # [n_c, n_t]
    target: int

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise ConfigurationError(
                f"relevance map must be [n_c, n_t], got shape {self.scores.shape}"
            )
        if not np.all(np.isfinite(self.scores)):
            raise ConfigurationError("relevance map contains non-finite scores")


class _Step:
    """One stage of the forward walk with its relevance-backward rule."""

    def __init__(self, name: str):
        self.name = name
        self.out_data: np.ndarray | None = None

    def back(self, relevance: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _LinearStep(_Step):
    """Conv/dense stage, batch-norm already folded into ``fwd``."""

    def __init__(self, name: str, fwd, x: np.ndarray, eps: float):
        super().__init__(name)
        self.fwd = fwd
        self.x = x
        self.eps = eps
        self.out_data = fwd(as_tensor(x)).data

    def back(self, relevance):
        z = self.out_data
        denom = np.where(z >= 0, z + self.eps, z - self.eps)
        share = relevance / denom
        seed = DiffTensor(self.x, requires_grad=True)
        with Tape():
            projected = ops.sum_all(ops.mul(self.fwd(seed), as_tensor(share)))
        backward(projected)
        return self.x * seed.grad


class _PoolStep(_Step):
    """Max-pool: hand the full output relevance to the winning input."""

    def __init__(self, name: str, layer: MaxPool2D, x: np.ndarray):
        super().__init__(name)
        self.layer = layer
        self.x = x
        self.out_data = layer(as_tensor(x)).data

    def back(self, relevance):
        seed = DiffTensor(self.x, requires_grad=True)
        with Tape():
            pooled = self.layer(seed)
            projected = ops.sum_all(ops.mul(pooled, as_tensor(relevance)))
        backward(projected)
        return seed.grad


class _IdentityStep(_Step):
    def __init__(self, name: str, out_data: np.ndarray):
        super().__init__(name)
        self.out_data = out_data

    def back(self, relevance):
        return relevance


class _ReshapeStep(_Step):
    def __init__(self, name: str, in_shape: tuple, out_data: np.ndarray):
        super().__init__(name)
        self.in_shape = in_shape
        self.out_data = out_data

    def back(self, relevance):
        return relevance.reshape(self.in_shape)


class _SliceStep(_Step):
    """Relevance of the class-irrelevant half is zero by construction."""

    def __init__(self, name: str, in_shape: tuple, half: int,
                 out_data: np.ndarray):
        super().__init__(name)
        self.in_shape = in_shape
        self.half = half
        self.out_data = out_data

    def back(self, relevance):
        full = np.zeros(self.in_shape, dtype=relevance.dtype)
        full[..., :self.half] = relevance
        return full


def _expand(layer):
    if isinstance(layer, SeparableConv2D):
        return [layer.depthwise, layer.pointwise]
    return [layer]


def _linear_fwd(layer, bn: BatchNorm | None):
    if isinstance(layer, Dense):
        kernel = as_tensor(layer.weight.data.astype(np.float64))
        bias = (layer.bias.data.astype(np.float64)
                if layer.bias is not None else None)

        def fwd(t):
            out = ops.matmul(t, kernel)
            if bias is not None:
                out = ops.add(out, as_tensor(np.broadcast_to(bias, out.shape)))
            return out
    elif isinstance(layer, DepthwiseConv2D):
        kernel = as_tensor(layer.kernel.data.astype(np.float64))

        def fwd(t):
            return ops.depthwise_conv(t, kernel, stride=layer.stride,
                                      padding=layer.padding)
    elif isinstance(layer, Conv2D):
        kernel = as_tensor(layer.kernel.data.astype(np.float64))

        def fwd(t):
            return ops.conv2d(t, kernel, stride=layer.stride,
                              padding=layer.padding)
    else:
        raise ConfigurationError(f"no linear rule for {type(layer).__name__}")
    if bn is None:
        return fwd
    gain, offset = bn.effective_affine()
    gain64 = gain.astype(np.float64)
    offset64 = offset.astype(np.float64)

    def folded(t):
        pre = fwd(t)
        scaled = ops.mul(pre, as_tensor(np.broadcast_to(gain64, pre.shape)))
        return ops.add(scaled, as_tensor(np.broadcast_to(offset64, pre.shape)))

    return folded


def _path_layers(model: EncoderStack):
    layers = []
    for layer in model.local.layers:
        layers.extend(_expand(layer))
    layers.append(model.splitter)
    layers.append(("slice", model.d1))
    for layer in model.global_enc.layers:
        layers.extend(_expand(layer))
    layers.append(("flatten", None))
    for layer in model.classifier.layers:
        layers.extend(_expand(layer))
    return layers


def _build_steps(model: EncoderStack, x: np.ndarray, eps: float) -> list[_Step]:
    """Forward walk in eval mode producing one relevance step per stage."""
    steps: list[_Step] = []
    current = x
    entries = _path_layers(model)
    i = 0
    while i < len(entries):
        entry = entries[i]
        if isinstance(entry, tuple):
            tag, arg = entry
            if tag == "slice":
                out = current[..., :arg]
                steps.append(_SliceStep("slice_re", current.shape, arg, out))
            else:
                out = current.reshape(current.shape[0], -1)
                steps.append(_ReshapeStep("flatten", current.shape, out))
            current = out
            i += 1
            continue
        if isinstance(entry, (Conv2D, DepthwiseConv2D, Dense)):
            bn = None
            if i + 1 < len(entries) and isinstance(entries[i + 1], BatchNorm):
                bn = entries[i + 1]
                i += 1
            step = _LinearStep(entry.name, _linear_fwd(entry, bn), current, eps)
        elif isinstance(entry, MaxPool2D):
            step = _PoolStep(entry.name, entry, current)
        elif isinstance(entry, (ELU, Dropout)):
            step = _IdentityStep(entry.name, entry(as_tensor(current)).data)
        elif isinstance(entry, BatchNorm):
            raise ConfigurationError(
                f"batch norm {entry.name} has no preceding linear layer to fold into"
            )
        else:
            raise ConfigurationError(
                f"no relevance rule for layer {type(entry).__name__}"
            )
        steps.append(step)
        current = step.out_data
        i += 1
    return steps


def _is_degenerate(model: EncoderStack) -> bool:
    weights = [p for p in model.parameters()
               if p.name.endswith((".kernel", ".weight"))]
    return all(not np.any(p.data) for p in weights)


def relevance_steps(model: EncoderStack, x: np.ndarray, target: int,
                    eps: float) -> list[tuple[str, np.ndarray]]:
    """Relevance at every stage boundary, outermost first.

    The first entry is the relevance vector at the logits; the last is the
    relevance over the input samples.  Used directly by the conservation
    checks; :func:`lrp_epsilon` keeps only the final entry.
    """
    if eps <= 0:
        raise ConfigurationError(f"eps must be > 0, got {eps}")
    steps = _build_steps(model, x, eps)
    logits = steps[-1].out_data
    if logits.shape != (1, 2):
        raise ConfigurationError(f"expected [1, 2] logits, got {logits.shape}")
    if not 0 <= target < logits.shape[1]:
        raise ConfigurationError(f"target class {target} out of range")
    relevance = np.zeros_like(logits, dtype=np.float64)
    relevance[0, target] = logits[0, target]
    collected = [("logits", relevance)]
    for step in reversed(steps):
        relevance = step.back(relevance)
        collected.append((step.name, relevance))
    return collected


def lrp_epsilon(model: EncoderStack, trial: Trial, target: int,
                eps: float = 1e-2) -> RelevanceMap:
    """Relevance of every input sample for the chosen class logit."""
    if _is_degenerate(model):
        warnings.warn("model weights are all zero, relevance map is all zero")
        return RelevanceMap(scores=np.zeros_like(trial.x, dtype=np.float64),
                            target=target)
    cfg = model.config
    if trial.x.shape != (cfg.n_c, cfg.n_t):
        raise ConfigurationError(
            f"trial shaped {trial.x.shape} does not match model "
            f"[{cfg.n_c}, {cfg.n_t}]"
        )
    x = trial.x.astype(np.float64).reshape(1, cfg.n_c, cfg.n_t, 1)
    collected = relevance_steps(model, x, target, eps)
    scores = collected[-1][1].reshape(cfg.n_c, cfg.n_t)
    return RelevanceMap(scores=scores, target=target)
