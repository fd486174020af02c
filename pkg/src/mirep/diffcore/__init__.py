"""Minimal reverse-mode autodiff over NHWC arrays: tensors, primitives, layers."""

from .tensor import DiffTensor, Parameter, Tape, active_tape, as_tensor, backward
from .ops import (
    add,
    add_scalar,
    batch_norm,
    broadcast_add_sample,
    concat,
    conv2d,
    dense,
    depthwise_conv,
    dropout,
    elu,
    exp,
    flatten,
    glorot_uniform,
    gradient_reversal,
    log,
    logmeanexp,
    matmul,
    max_pool,
    mean_all,
    mul,
    neg,
    one_hot,
    reshape,
    scale,
    separable_conv,
    slice_axis,
    softmax,
    softmax_cross_entropy,
    softplus,
    sq_sum,
    sub,
    sum_all,
    take_rows,
    tile_spatial,
)
from . import layers

__all__ = [
    "DiffTensor", "Parameter", "Tape", "active_tape", "as_tensor", "backward",
    "add", "add_scalar", "batch_norm", "broadcast_add_sample", "concat",
    "conv2d", "dense", "depthwise_conv", "dropout", "elu", "exp", "flatten",
    "glorot_uniform", "gradient_reversal", "log", "logmeanexp", "matmul",
    "max_pool", "mean_all", "mul", "neg", "one_hot", "reshape", "scale",
    "separable_conv", "slice_axis", "softmax", "softmax_cross_entropy",
    "softplus", "sq_sum", "sub", "sum_all", "take_rows", "tile_spatial", "layers",
]
