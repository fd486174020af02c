"""Differentiable primitives over NHWC feature maps.

All convolution-family ops lower to an im2col gather followed by a matrix
product, so one BLAS call carries the arithmetic.  Backward functions are
hand-derived; every op has a finite-difference oracle in the test suite.

Layout conventions:
    feature maps  [batch, height, width, depth]
    conv kernels  [k_h, k_w, depth_in, depth_out]
    depthwise     [k_h, k_w, depth_in, multiplier]
"""

from __future__ import annotations

import numpy as np

from ..errors import BatchSizeError, ConfigurationError, ContractError, DimensionError
from .tensor import DiffTensor, active_tape, as_tensor


def _pair(value, name: str) -> tuple[int, int]:
    if isinstance(value, (int, np.integer)):
        return int(value), int(value)
    pair = tuple(int(v) for v in value)
    if len(pair) != 2:
        raise ConfigurationError(f"{name} must be an int or a pair, got {value!r}")
    return pair


def _record(out: DiffTensor, inputs: tuple, backward_fn) -> DiffTensor:
    tape = active_tape()
    needs = any(t is not None and t.requires_grad for t in inputs)
    out.requires_grad = needs
    if tape is not None and needs:
        tape.record(out, inputs, backward_fn)
    return out


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    """Uniform init on [-limit, limit] with limit = sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def one_hot(labels: np.ndarray, num_classes: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ConfigurationError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1.0
    return out


# ---------------------------------------------------------------------------
# elementwise and reduction primitives


def add(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add needs matching shapes, got {a.shape} and {b.shape}")
    out = DiffTensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (g, g))


def sub(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"sub needs matching shapes, got {a.shape} and {b.shape}")
    out = DiffTensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (g, -g))


def mul(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mul needs matching shapes, got {a.shape} and {b.shape}")
    out = DiffTensor(a.data * b.data)
    return _record(out, (a, b), lambda g: (g * b.data, g * a.data))


def scale(x: DiffTensor, c: float) -> DiffTensor:
    c = float(c)
    out = DiffTensor(x.data * c)
    return _record(out, (x,), lambda g: (g * c,))


def add_scalar(x: DiffTensor, c: float) -> DiffTensor:
    out = DiffTensor(x.data + float(c))
    return _record(out, (x,), lambda g: (g,))


def neg(x: DiffTensor) -> DiffTensor:
    return scale(x, -1.0)


def exp(x: DiffTensor) -> DiffTensor:
    y = np.exp(x.data)
    out = DiffTensor(y)
    return _record(out, (x,), lambda g: (g * y,))


def log(x: DiffTensor) -> DiffTensor:
    out = DiffTensor(np.log(x.data))
    return _record(out, (x,), lambda g: (g / x.data,))


def mean_all(x: DiffTensor) -> DiffTensor:
    n = x.data.size
    out = DiffTensor(np.asarray(x.data.mean(), dtype=x.data.dtype))
    return _record(out, (x,), lambda g: (np.full_like(x.data, g / n),))


def sum_all(x: DiffTensor) -> DiffTensor:
    out = DiffTensor(np.asarray(x.data.sum(), dtype=x.data.dtype))
    return _record(out, (x,), lambda g: (np.full_like(x.data, g),))


def sq_sum(x: DiffTensor) -> DiffTensor:
    """Sum of squared entries; the weight-decay building block."""
    out = DiffTensor(np.asarray((x.data * x.data).sum(), dtype=x.data.dtype))
    return _record(out, (x,), lambda g: (2.0 * g * x.data,))


def logmeanexp(x: DiffTensor) -> DiffTensor:
    """log(mean(exp(x))) with the max subtracted before exponentiation."""
    shift = float(x.data.max())
    return add_scalar(log(mean_all(exp(add_scalar(x, -shift)))), shift)


def reshape(x: DiffTensor, shape) -> DiffTensor:
    shape = tuple(int(s) for s in shape)
    old = x.shape
    out = DiffTensor(x.data.reshape(shape))
    return _record(out, (x,), lambda g: (g.reshape(old),))


def flatten(x: DiffTensor) -> DiffTensor:
    return reshape(x, (x.shape[0], -1))


def concat(tensors: list[DiffTensor], axis: int = -1) -> DiffTensor:
    tensors = [as_tensor(t) for t in tensors]
    out = DiffTensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record(out, tuple(tensors), back)


def slice_axis(x: DiffTensor, axis: int, start: int, stop: int) -> DiffTensor:
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = DiffTensor(x.data[index].copy())

    def back(g):
        dx = np.zeros_like(x.data)
        dx[index] = g
        return (dx,)

    return _record(out, (x,), back)


def take_rows(x: DiffTensor, indices: np.ndarray) -> DiffTensor:
    """Gather rows along axis 0; backward scatter-adds into the source rows."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise DimensionError(f"indices must be 1-d, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise DimensionError(
            f"indices range [{idx.min()}, {idx.max()}] outside batch {x.shape[0]}"
        )
    out = DiffTensor(x.data[idx])

    def back(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, idx, g)
        return (dx,)

    return _record(out, (x,), back)


def tile_spatial(v: DiffTensor, height: int, width: int) -> DiffTensor:
    """Replicate a per-sample vector [B, D] onto a [B, height, width, D] map."""
    if v.ndim != 2:
        raise DimensionError(f"tile_spatial expects [batch, depth], got {v.shape}")
    out = DiffTensor(np.broadcast_to(
        v.data[:, None, None, :], (v.shape[0], height, width, v.shape[1])
    ).copy())
    return _record(out, (v,), lambda g: (g.sum(axis=(1, 2)),))


def broadcast_add_sample(feature_map: DiffTensor, v: DiffTensor) -> DiffTensor:
    """Add a per-sample vector [B, D] to every spatial site of [B, H, W, D]."""
    if feature_map.ndim != 4 or v.ndim != 2:
        raise DimensionError(
            f"broadcast_add_sample expects a 4-d map and a 2-d vector, "
            f"got {feature_map.shape} and {v.shape}"
        )
    if feature_map.shape[0] != v.shape[0] or feature_map.shape[3] != v.shape[1]:
        raise DimensionError(
            f"batch/depth mismatch: map {feature_map.shape}, vector {v.shape}"
        )
    out = DiffTensor(feature_map.data + v.data[:, None, None, :])
    return _record(out, (feature_map, v), lambda g: (g, g.sum(axis=(1, 2))))


# ---------------------------------------------------------------------------
# activations


def elu(x: DiffTensor, alpha: float = 1.0) -> DiffTensor:
    neg_mask = x.data < 0
    y = x.data.copy()
    y[neg_mask] = alpha * np.expm1(x.data[neg_mask])
    out = DiffTensor(y)

    def back(g):
        d = np.ones_like(y)
        d[neg_mask] = y[neg_mask] + alpha
        return (g * d,)

    return _record(out, (x,), back)


def softplus(x: DiffTensor) -> DiffTensor:
    """log(1 + exp(x)) computed as max(x, 0) + log1p(exp(-|x|))."""
    z = np.exp(-np.abs(x.data))
    y = np.maximum(x.data, 0.0) + np.log1p(z)
    out = DiffTensor(y.astype(x.data.dtype, copy=False))

    def back(g):
        sig = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
        return ((g * sig).astype(x.data.dtype, copy=False),)

    return _record(out, (x,), back)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Plain-array row softmax for reporting probabilities."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# dense / matmul


def matmul(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul expects [n, k] @ [k, m], got {a.shape} and {b.shape}"
        )
    out = DiffTensor(a.data @ b.data)

    def back(g):
        da = g @ b.data.T if a.requires_grad else None
        db = a.data.T @ g if b.requires_grad else None
        return (da, db)

    return _record(out, (a, b), back)


def dense(x: DiffTensor, w: DiffTensor, b: DiffTensor | None = None) -> DiffTensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(
            f"dense expects x [n, d_in] and w [d_in, d_out], "
            f"got {x.shape} and {w.shape}"
        )
    y = x.data @ w.data
    if b is not None:
        if b.shape != (w.shape[1],):
            raise DimensionError(f"bias shape {b.shape} does not match d_out {w.shape[1]}")
        y = y + b.data
    out = DiffTensor(y)

    def back(g):
        dx = g @ w.data.T if x.requires_grad else None
        dw = x.data.T @ g if w.requires_grad else None
        db = g.sum(axis=0) if (b is not None and b.requires_grad) else None
        return (dx, dw, db)

    return _record(out, (x, w, b), back)


# ---------------------------------------------------------------------------
# convolution family


def _gather_windows(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int,
                    oh: int, ow: int) -> np.ndarray:
    b, _, _, c = xp.shape
    cols = np.empty((b, oh, ow, kh, kw, c), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = xp[:, i:i + sh * oh:sh, j:j + sw * ow:sw, :]
    return cols


def _scatter_windows(dcols: np.ndarray, xshape, kh: int, kw: int, sh: int,
                     sw: int, oh: int, ow: int) -> np.ndarray:
    dx = np.zeros(xshape, dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dx[:, i:i + sh * oh:sh, j:j + sw * ow:sw, :] += dcols[:, :, :, i, j, :]
    return dx


def _conv_geometry(x: DiffTensor, kh: int, kw: int, stride, padding):
    if x.ndim != 4:
        raise DimensionError(f"convolution input must be 4-d NHWC, got {x.shape}")
    sh, sw = _pair(stride, "stride")
    if sh < 1 or sw < 1:
        raise ConfigurationError(f"stride must be positive, got {(sh, sw)}")
    if padding == "valid":
        ph, pw = 0, 0
    else:
        ph, pw = _pair(padding, "padding")
    h, w = x.shape[1] + 2 * ph, x.shape[2] + 2 * pw
    oh, ow = (h - kh) // sh + 1, (w - kw) // sw + 1
    if oh < 1 or ow < 1:
        raise DimensionError(
            f"kernel ({kh}, {kw}) does not fit input height/width "
            f"({x.shape[1]}, {x.shape[2]}) with padding ({ph}, {pw})"
        )
    return sh, sw, ph, pw, oh, ow


def _padded(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def conv2d(x: DiffTensor, kernel: DiffTensor, stride=(1, 1),
           padding="valid") -> DiffTensor:
    """Cross-correlation of an NHWC map with a [kh, kw, d_in, d_out] kernel."""
    if kernel.ndim != 4:
        raise DimensionError(f"conv2d kernel must be 4-d, got {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if x.shape[3] != cin:
        raise DimensionError(
            f"input depth axis 3 is {x.shape[3]} but kernel depth axis 2 is {cin}"
        )
    sh, sw, ph, pw, oh, ow = _conv_geometry(x, kh, kw, stride, padding)
    xp = _padded(x.data, ph, pw)
    cols = _gather_windows(xp, kh, kw, sh, sw, oh, ow)
    b = x.shape[0]
    colmat = cols.reshape(b * oh * ow, kh * kw * cin)
    kmat = kernel.data.reshape(kh * kw * cin, cout)
    out = DiffTensor((colmat @ kmat).reshape(b, oh, ow, cout))

    def back(g):
        gmat = g.reshape(b * oh * ow, cout)
        dk = (colmat.T @ gmat).reshape(kernel.shape) if kernel.requires_grad else None
        dx = None
        if x.requires_grad:
            dcols = (gmat @ kmat.T).reshape(b, oh, ow, kh, kw, cin)
            dxp = _scatter_windows(dcols, xp.shape, kh, kw, sh, sw, oh, ow)
            dx = dxp[:, ph:xp.shape[1] - ph, pw:xp.shape[2] - pw, :] if (ph or pw) else dxp
        return (dx, dk)

    return _record(out, (x, kernel), back)


def depthwise_conv(x: DiffTensor, kernel: DiffTensor, stride=(1, 1),
                   padding="valid") -> DiffTensor:
    """Per-channel convolution with a [kh, kw, d_in, multiplier] kernel.

    Input channel c produces output channels [c * m, c * m + multiplier),
    so the output depth axis is channel-major.
    """
    if kernel.ndim != 4:
        raise DimensionError(f"depthwise kernel must be 4-d, got {kernel.shape}")
    kh, kw, cin, mult = kernel.shape
    if mult < 1:
        raise ConfigurationError(f"depth multiplier must be >= 1, got {mult}")
    if x.shape[3] != cin:
        raise DimensionError(
            f"input depth axis 3 is {x.shape[3]} but kernel depth axis 2 is {cin}"
        )
    sh, sw, ph, pw, oh, ow = _conv_geometry(x, kh, kw, stride, padding)
    xp = _padded(x.data, ph, pw)
    cols = _gather_windows(xp, kh, kw, sh, sw, oh, ow)
    b = x.shape[0]
    y = np.einsum("bhwijc,ijcm->bhwcm", cols, kernel.data, optimize=True)
    out = DiffTensor(y.reshape(b, oh, ow, cin * mult))

    def back(g):
        gr = g.reshape(b, oh, ow, cin, mult)
        dk = (np.einsum("bhwijc,bhwcm->ijcm", cols, gr, optimize=True)
              if kernel.requires_grad else None)
        dx = None
        if x.requires_grad:
            dcols = np.einsum("bhwcm,ijcm->bhwijc", gr, kernel.data, optimize=True)
            dxp = _scatter_windows(dcols, xp.shape, kh, kw, sh, sw, oh, ow)
            dx = dxp[:, ph:xp.shape[1] - ph, pw:xp.shape[2] - pw, :] if (ph or pw) else dxp
        return (dx, dk)

    return _record(out, (x, kernel), back)


def separable_conv(x: DiffTensor, depthwise_kernel: DiffTensor,
                   pointwise_kernel: DiffTensor, stride=(1, 1),
                   padding="valid") -> DiffTensor:
    """Depthwise convolution followed by a 1x1 mixing convolution."""
    ph, pw = pointwise_kernel.shape[0], pointwise_kernel.shape[1]
    if (ph, pw) != (1, 1):
        raise DimensionError(
            f"pointwise kernel must be 1x1 spatially, got ({ph}, {pw})"
        )
    expect = depthwise_kernel.shape[2] * depthwise_kernel.shape[3]
    if pointwise_kernel.shape[2] != expect:
        raise DimensionError(
            f"pointwise input depth {pointwise_kernel.shape[2]} does not match "
            f"depthwise output depth {expect}"
        )
    mid = depthwise_conv(x, depthwise_kernel, stride=stride, padding=padding)
    return conv2d(mid, pointwise_kernel)


def max_pool(x: DiffTensor, window, stride=None) -> DiffTensor:
    """Max over non-overlapping (or strided) windows.

    Gradient routes to the argmax of each window; ties go to the lowest
    linear index within the window (row-major), which for row-major inputs
    is also the lowest input linear index.
    """
    wh, ww = _pair(window, "window")
    stride = (wh, ww) if stride is None else stride
    sh, sw, _, _, oh, ow = _conv_geometry(x, wh, ww, stride, "valid")
    cols = _gather_windows(x.data, wh, ww, sh, sw, oh, ow)
    b, c = x.shape[0], x.shape[3]
    flat = cols.reshape(b, oh, ow, wh * ww, c)
    arg = flat.argmax(axis=3)
    out = DiffTensor(np.take_along_axis(flat, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :])

    def back(g):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, arg[:, :, :, None, :], g[:, :, :, None, :], axis=3)
        dcols = dflat.reshape(b, oh, ow, wh, ww, c)
        return (_scatter_windows(dcols, x.shape, wh, ww, sh, sw, oh, ow),)

    return _record(out, (x,), back)


# ---------------------------------------------------------------------------
# normalization, regularization, flow control


def batch_norm(x: DiffTensor, scale_t: DiffTensor, shift_t: DiffTensor,
               running_mean: np.ndarray, running_var: np.ndarray, *,
               eps: float = 1e-3, momentum: float = 0.99, train: bool):
    """Per-feature normalization over all leading axes.

    Returns ``(out, new_running_mean, new_running_var)``; the running
    statistics are plain arrays updated only in train mode (biased batch
    variance, exponential moving average with the given momentum).
    """
    d = x.shape[-1]
    if scale_t.shape != (d,) or shift_t.shape != (d,):
        raise DimensionError(
            f"scale/shift must have shape ({d},), got {scale_t.shape} and {shift_t.shape}"
        )
    axes = tuple(range(x.ndim - 1))
    if train:
        if x.shape[0] < 2:
            raise BatchSizeError(
                f"batch_norm in train mode needs batch >= 2, got {x.shape[0]}"
            )
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = DiffTensor((scale_t.data * xhat + shift_t.data).astype(x.data.dtype, copy=False))
    n = x.data.size // d

    def back(g):
        dscale = (g * xhat).sum(axis=axes) if scale_t.requires_grad else None
        dshift = g.sum(axis=axes) if shift_t.requires_grad else None
        dx = None
        if x.requires_grad:
            if train:
                gsum = g.sum(axis=axes)
                gx = (g * xhat).sum(axis=axes)
                dx = (scale_t.data * inv / n) * (n * g - gsum - xhat * gx)
            else:
                dx = g * (scale_t.data * inv)
            dx = dx.astype(x.data.dtype, copy=False)
        return (dx, dscale, dshift)

    out = _record(out, (x, scale_t, shift_t), back)
    return out, new_mean, new_var


def dropout(x: DiffTensor, rate: float, *, train: bool,
            rng: np.random.Generator | None = None) -> DiffTensor:
    """Inverted dropout: survivors are scaled by 1 / (1 - rate) at train time."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        out = DiffTensor(x.data)
        return _record(out, (x,), lambda g: (g,))
    if rng is None:
        raise ContractError("dropout in train mode requires an rng")
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype)
    factor = keep / (1.0 - rate)
    out = DiffTensor(x.data * factor)
    return _record(out, (x,), lambda g: (g * factor,))


def gradient_reversal(x: DiffTensor) -> DiffTensor:
    """Identity on the forward pass; negates the gradient on the way back."""
    out = DiffTensor(x.data)
    return _record(out, (x,), lambda g: (-g,))


def softmax_cross_entropy(logits: DiffTensor, labels_onehot: np.ndarray) -> DiffTensor:
    """Mean cross-entropy from logits via a shifted log-sum-exp.

    The gradient with respect to the logits is (softmax - labels) / batch.
    """
    y = np.asarray(labels_onehot)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be [batch, classes], got {logits.shape}")
    if logits.shape[1] < 2:
        raise ConfigurationError(
            f"need at least 2 classes, got {logits.shape[1]}"
        )
    if y.shape != logits.shape:
        raise DimensionError(
            f"labels shape {y.shape} does not match logits shape {logits.shape}"
        )
    rows_ok = np.all(np.isin(y, (0.0, 1.0))) and np.all(y.sum(axis=1) == 1.0)
    if not rows_ok:
        raise ContractError("labels must be one-hot rows (exactly one 1 per row)")
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    nll = lse - (z * y).sum(axis=1)
    b = z.shape[0]
    out = DiffTensor(np.asarray(nll.mean(), dtype=z.dtype))

    def back(g):
        p = softmax(z)
        return ((g * (p - y) / b).astype(z.dtype, copy=False),)

    return _record(out, (logits,), back)


# small operator conveniences used by loss code
DiffTensor.__add__ = lambda self, other: (
    add_scalar(self, other) if np.isscalar(other) else add(self, other)
)
DiffTensor.__sub__ = lambda self, other: (
    add_scalar(self, -other) if np.isscalar(other) else sub(self, other)
)
DiffTensor.__mul__ = lambda self, other: scale(self, other)
DiffTensor.__rmul__ = lambda self, other: scale(self, other)
DiffTensor.__neg__ = lambda self: scale(self, -1.0)
