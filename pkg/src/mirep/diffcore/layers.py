"""Stateful layer objects built on the functional primitives.

Layers own Parameters (and, for batch normalization, running statistics);
``__call__`` threads the train flag, the rng for stochastic layers, and an
optional ``trace`` list that collects ``(layer, input_tensor)`` pairs so a
relevance pass can revisit the exact forward inputs.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from . import ops
from .tensor import DiffTensor, Parameter


class Layer:
    """Base class; subclasses override __call__ and parameters()."""

    name: str = ""

    def parameters(self) -> list[Parameter]:
        return []

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Mutable non-trainable state, keyed by qualified name."""
        return {}

    def __call__(self, x: DiffTensor, *, train: bool = False,
                 rng: np.random.Generator | None = None,
                 trace: list | None = None) -> DiffTensor:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class Conv2D(Layer):
    def __init__(self, name: str, kh: int, kw: int, depth_in: int, depth_out: int,
                 *, stride=(1, 1), padding="valid", rng: np.random.Generator,
                 dtype=np.float32, l2: float = 0.0):
        self.name = name
        self.stride = stride
        self.padding = padding
        fan_in = kh * kw * depth_in
        fan_out = kh * kw * depth_out
        init = ops.glorot_uniform(rng, (kh, kw, depth_in, depth_out), fan_in, fan_out, dtype)
        self.kernel = Parameter(f"{name}.kernel", init, l2_coefficient=l2)

    def parameters(self):
        return [self.kernel]

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.conv2d(x, self.kernel.tensor, stride=self.stride, padding=self.padding)


class DepthwiseConv2D(Layer):
    def __init__(self, name: str, kh: int, kw: int, depth_in: int, multiplier: int,
                 *, stride=(1, 1), padding="valid", rng: np.random.Generator,
                 dtype=np.float32, l2: float = 0.0):
        if multiplier < 1:
            raise ConfigurationError(f"depth multiplier must be >= 1, got {multiplier}")
        self.name = name
        self.stride = stride
        self.padding = padding
        fan_in = kh * kw * depth_in
        fan_out = kh * kw * multiplier
        init = ops.glorot_uniform(rng, (kh, kw, depth_in, multiplier), fan_in, fan_out, dtype)
        self.kernel = Parameter(f"{name}.kernel", init, l2_coefficient=l2)

    def parameters(self):
        return [self.kernel]

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.depthwise_conv(x, self.kernel.tensor, stride=self.stride,
                                  padding=self.padding)


class SeparableConv2D(Layer):
    """Depthwise stage then 1x1 pointwise stage, traced as two layers."""

    def __init__(self, name: str, kh: int, kw: int, depth_in: int, multiplier: int,
                 depth_out: int, *, stride=(1, 1), padding="valid",
                 rng: np.random.Generator, dtype=np.float32, l2: float = 0.0):
        self.name = name
        self.depthwise = DepthwiseConv2D(f"{name}.dw", kh, kw, depth_in, multiplier,
                                         stride=stride, padding=padding, rng=rng,
                                         dtype=dtype, l2=l2)
        self.pointwise = Conv2D(f"{name}.pw", 1, 1, depth_in * multiplier, depth_out,
                                rng=rng, dtype=dtype, l2=l2)

    def parameters(self):
        return self.depthwise.parameters() + self.pointwise.parameters()

    def __call__(self, x, *, train=False, rng=None, trace=None):
        mid = self.depthwise(x, train=train, rng=rng, trace=trace)
        return self.pointwise(mid, train=train, rng=rng, trace=trace)


class MaxPool2D(Layer):
    def __init__(self, name: str, window, stride=None):
        self.name = name
        self.window = window
        self.stride = stride

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.max_pool(x, self.window, stride=self.stride)


class BatchNorm(Layer):
    def __init__(self, name: str, depth: int, *, eps: float = 1e-3,
                 momentum: float = 0.99, dtype=np.float32):
        self.name = name
        self.eps = float(eps)
        self.momentum = float(momentum)
        self.scale = Parameter(f"{name}.scale", np.ones(depth, dtype=dtype))
        self.shift = Parameter(f"{name}.shift", np.zeros(depth, dtype=dtype))
        self.running_mean = np.zeros(depth, dtype=dtype)
        self.running_var = np.ones(depth, dtype=dtype)

    def parameters(self):
        return [self.scale, self.shift]

    def state_arrays(self):
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def effective_affine(self) -> tuple[np.ndarray, np.ndarray]:
        """Eval-mode behaviour as y = a * x + b using the running statistics."""
        a = self.scale.data / np.sqrt(self.running_var + self.eps)
        return a, self.shift.data - self.running_mean * a

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        out, new_mean, new_var = ops.batch_norm(
            x, self.scale.tensor, self.shift.tensor,
            self.running_mean, self.running_var,
            eps=self.eps, momentum=self.momentum, train=train,
        )
        if train:
            self.running_mean = new_mean.astype(self.running_mean.dtype, copy=False)
            self.running_var = new_var.astype(self.running_var.dtype, copy=False)
        return out


class ELU(Layer):
    def __init__(self, name: str, alpha: float = 1.0):
        self.name = name
        self.alpha = alpha

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.elu(x, alpha=self.alpha)


class Dropout(Layer):
    def __init__(self, name: str, rate: float):
        self.name = name
        self.rate = float(rate)

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.dropout(x, self.rate, train=train, rng=rng)


class Flatten(Layer):
    def __init__(self, name: str = "flatten"):
        self.name = name

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.flatten(x)


class Dense(Layer):
    def __init__(self, name: str, depth_in: int, depth_out: int, *,
                 rng: np.random.Generator, dtype=np.float32, l2: float = 0.0,
                 bias: bool = True):
        self.name = name
        init = ops.glorot_uniform(rng, (depth_in, depth_out), depth_in, depth_out, dtype)
        self.weight = Parameter(f"{name}.weight", init, l2_coefficient=l2)
        self.bias = Parameter(f"{name}.bias", np.zeros(depth_out, dtype=dtype)) if bias else None

    def parameters(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def __call__(self, x, *, train=False, rng=None, trace=None):
        if trace is not None:
            trace.append((self, x))
        return ops.dense(x, self.weight.tensor,
                         self.bias.tensor if self.bias is not None else None)


class Sequential(Layer):
    def __init__(self, name: str, layers: list[Layer]):
        self.name = name
        self.layers = list(layers)

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def state_arrays(self):
        out = {}
        for layer in self.layers:
            out.update(layer.state_arrays())
        return out

    def __call__(self, x, *, train=False, rng=None, trace=None):
        for layer in self.layers:
            x = layer(x, train=train, rng=rng, trace=trace)
        return x
