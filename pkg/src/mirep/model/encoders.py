"""Encoder stacks: local encoder, point-wise splitter, global encoder, classifier.

Trials enter as [B, n_c, n_t] and are laid out as NHWC maps with height =
channels and width = time, so temporal kernels are [1 x k] and spatial
kernels are [n_c x 1].  Both backbones end with a single dense classifier on
the flattened global feature; the irrelevant half of the split never reaches
the global encoder or the classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diffcore import DiffTensor, ops
from ..diffcore.layers import (
    ELU,
    BatchNorm,
    Conv2D,
    Dense,
    DepthwiseConv2D,
    Dropout,
    MaxPool2D,
    SeparableConv2D,
    Sequential,
)
from ..errors import ConfigurationError, DimensionError

EEGNET_DEPTH_MULTIPLIER = 2
EEGNET_SEPARABLE_LEN = 16
DCN_TEMPORAL_LEN = 10
DCN_POOL = 3
DEFAULT_BASE_DEPTH = {"eegnet": 8, "deepconvnet": 25}


@dataclass
class EncoderConfig:
    backbone: str = "eegnet"
    n_c: int = 8
    n_t: int = 80
    sample_rate: float = 64.0
    base_depth: int | None = None
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.backbone not in ("eegnet", "deepconvnet"):
            raise ConfigurationError(
                f"backbone must be 'eegnet' or 'deepconvnet', got {self.backbone!r}"
            )
        if self.base_depth is None:
            self.base_depth = DEFAULT_BASE_DEPTH[self.backbone]
        if self.n_c < 2 or self.n_t < 1:
            raise ConfigurationError(
                f"need n_c >= 2 and n_t >= 1, got ({self.n_c}, {self.n_t})"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(
                f"dropout_rate must lie in [0, 1), got {self.dropout_rate}"
            )

    @property
    def temporal_kernel(self) -> int:
        """First temporal kernel length: half the sample rate for eegnet."""
        if self.backbone == "eegnet":
            return int(self.sample_rate) // 2
        return DCN_TEMPORAL_LEN


@dataclass
class FeatureBundle:
    """Forward-pass features: local map, its split halves, global vector."""

    f_l: DiffTensor
    f_re: DiffTensor
    f_ir: DiffTensor
    f_g: DiffTensor
    logits: DiffTensor


def _shrink(extent: int, kernel: int, stage: str) -> int:
    out = extent - kernel + 1
    if out < 1:
        raise DimensionError(
            f"{stage}: kernel {kernel} does not fit extent {extent}"
        )
    return out


def _pool(extent: int, window: int, stage: str) -> int:
    out = extent // window
    if out < 1:
        raise DimensionError(
            f"{stage}: pool window {window} does not fit extent {extent}"
        )
    return out


class EncoderStack:
    """E_l, V, E_g, C plus bookkeeping about the feature geometry."""

    def __init__(self, config: EncoderConfig, local: Sequential, splitter: Conv2D,
                 global_enc: Sequential, classifier: Sequential,
                 feature_shape: tuple[int, int], d1: int, d_g: int):
        self.config = config
        self.local = local
        self.splitter = splitter
        self.global_enc = global_enc
        self.classifier = classifier
        self.feature_shape = feature_shape
        self.d1 = d1
        self.d_g = d_g

    def as_tuple(self):
        return self.local, self.global_enc, self.splitter, self.classifier

    def parameters(self):
        out = []
        for part in (self.local, self.splitter, self.global_enc, self.classifier):
            out.extend(part.parameters())
        names = [p.name for p in out]
        if len(names) != len(set(names)):
            raise ConfigurationError(f"duplicate parameter names in {names}")
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for part in (self.local, self.splitter, self.global_enc, self.classifier):
            out.update(part.state_arrays())
        return out

    def decompose(self, f_l: DiffTensor) -> tuple[DiffTensor, DiffTensor]:
        return decompose(self, f_l)

    def forward(self, x, *, train: bool = False,
                rng: np.random.Generator | None = None):
        return forward(x, self, train=train, rng=rng)


def decompose(model: EncoderStack, f_l: DiffTensor) -> tuple[DiffTensor, DiffTensor]:
    """Point-wise expansion to 2*d1 depth, then split into disjoint halves."""
    out = model.splitter(f_l)
    depth = out.shape[-1]
    if depth % 2 != 0:
        raise ConfigurationError(f"splitter output depth {depth} is odd")
    half = depth // 2
    f_re = ops.slice_axis(out, -1, 0, half)
    f_ir = ops.slice_axis(out, -1, half, depth)
    return f_re, f_ir


def forward(x, model: EncoderStack, *, train: bool = False,
            rng: np.random.Generator | None = None
            ) -> tuple[FeatureBundle, np.ndarray]:
    """Run the stack; class probabilities are computed from f_re only."""
    if not isinstance(x, DiffTensor):
        x = DiffTensor(np.asarray(x))
    cfg = model.config
    if x.ndim == 3 and x.shape[1:] == (cfg.n_c, cfg.n_t):
        x = ops.reshape(x, (x.shape[0], cfg.n_c, cfg.n_t, 1))
    if x.shape[1:] != (cfg.n_c, cfg.n_t, 1):
        raise DimensionError(
            f"batch shaped {x.shape} does not match config "
            f"[B, {cfg.n_c}, {cfg.n_t}]"
        )
    f_l = model.local(x, train=train, rng=rng)
    f_re, f_ir = decompose(model, f_l)
    g_map = model.global_enc(f_re, train=train, rng=rng)
    f_g = ops.flatten(g_map)
    logits = model.classifier(f_g, train=train, rng=rng)
    bundle = FeatureBundle(f_l=f_l, f_re=f_re, f_ir=f_ir, f_g=f_g, logits=logits)
    return bundle, ops.softmax(logits.data)


def build_eegnet(config: EncoderConfig, rng: np.random.Generator, *,
                 dtype=np.float32, l2: float = 0.1) -> EncoderStack:
    """Three-conv backbone: temporal, depthwise spatial, separable.

    The local encoder is the first two layers; the separable layer is the
    global encoder.  Depth defaults (8 temporal filters, multiplier 2,
    16 separable filters) follow the usual compact parameterization.
    """
    if config.backbone != "eegnet":
        raise ConfigurationError(f"config backbone is {config.backbone!r}")
    f1 = config.base_depth
    d1 = f1 * EEGNET_DEPTH_MULTIPLIER
    f2 = d1
    k1 = config.temporal_kernel
    w = _shrink(config.n_t, k1, "eegnet temporal conv")
    _shrink(config.n_c, config.n_c, "eegnet spatial conv")
    w_g = _shrink(w, EEGNET_SEPARABLE_LEN, "eegnet separable conv")
    d_g = w_g * f2

    local = Sequential("local", [
        Conv2D("local.temporal", 1, k1, 1, f1, rng=rng, dtype=dtype, l2=l2),
        BatchNorm("local.bn1", f1, dtype=dtype),
        DepthwiseConv2D("local.spatial", config.n_c, 1, f1,
                        EEGNET_DEPTH_MULTIPLIER, rng=rng, dtype=dtype, l2=l2),
        BatchNorm("local.bn2", d1, dtype=dtype),
        ELU("local.act2"),
        Dropout("local.drop2", config.dropout_rate),
    ])
    splitter = Conv2D("splitter", 1, 1, d1, 2 * d1, rng=rng, dtype=dtype, l2=l2)
    global_enc = Sequential("global", [
        SeparableConv2D("global.sep", 1, EEGNET_SEPARABLE_LEN, d1, 1, f2,
                        rng=rng, dtype=dtype, l2=l2),
        BatchNorm("global.bn", f2, dtype=dtype),
        ELU("global.act"),
        Dropout("global.drop", config.dropout_rate),
    ])
    classifier = Sequential("classifier", [
        Dense("classifier.out", d_g, 2, rng=rng, dtype=dtype, l2=l2),
    ])
    return EncoderStack(config, local, splitter, global_enc, classifier,
                        feature_shape=(1, w), d1=d1, d_g=d_g)


def build_deepconvnet(config: EncoderConfig, rng: np.random.Generator, *,
                      dtype=np.float32, l2: float = 0.1) -> EncoderStack:
    """Four conv blocks with doubling widths; block 4 is the global encoder.

    Block 1 pairs a temporal conv with a spatial conv across all channels;
    blocks 2-4 are temporal convs followed by [1 x 3] max-pools.
    """
    if config.backbone != "deepconvnet":
        raise ConfigurationError(f"config backbone is {config.backbone!r}")
    b = config.base_depth
    widths = (b, b, 2 * b, 4 * b, 8 * b)
    k = DCN_TEMPORAL_LEN

    w = _shrink(config.n_t, k, "deepconvnet block 1 temporal conv")
    _shrink(config.n_c, config.n_c, "deepconvnet block 1 spatial conv")
    w = _pool(_shrink(w, k, "deepconvnet block 2 conv"), DCN_POOL,
              "deepconvnet block 2 pool")
    w = _pool(_shrink(w, k, "deepconvnet block 3 conv"), DCN_POOL,
              "deepconvnet block 3 pool")
    w1 = w
    w_g = _pool(_shrink(w, k, "deepconvnet block 4 conv"), DCN_POOL,
                "deepconvnet block 4 pool")
    d1 = widths[3]
    d_g = w_g * widths[4]

    local = Sequential("local", [
        Conv2D("local.b1.temporal", 1, k, 1, widths[0], rng=rng, dtype=dtype, l2=l2),
        Conv2D("local.b1.spatial", config.n_c, 1, widths[0], widths[1],
               rng=rng, dtype=dtype, l2=l2),
        BatchNorm("local.b1.bn", widths[1], dtype=dtype),
        ELU("local.b1.act"),
        Dropout("local.b1.drop", config.dropout_rate),
        Conv2D("local.b2.conv", 1, k, widths[1], widths[2], rng=rng, dtype=dtype, l2=l2),
        BatchNorm("local.b2.bn", widths[2], dtype=dtype),
        ELU("local.b2.act"),
        MaxPool2D("local.b2.pool", (1, DCN_POOL)),
        Dropout("local.b2.drop", config.dropout_rate),
        Conv2D("local.b3.conv", 1, k, widths[2], widths[3], rng=rng, dtype=dtype, l2=l2),
        BatchNorm("local.b3.bn", widths[3], dtype=dtype),
        ELU("local.b3.act"),
        MaxPool2D("local.b3.pool", (1, DCN_POOL)),
        Dropout("local.b3.drop", config.dropout_rate),
    ])
    splitter = Conv2D("splitter", 1, 1, d1, 2 * d1, rng=rng, dtype=dtype, l2=l2)
    global_enc = Sequential("global", [
        Conv2D("global.b4.conv", 1, k, widths[3], widths[4], rng=rng, dtype=dtype, l2=l2),
        BatchNorm("global.b4.bn", widths[4], dtype=dtype),
        ELU("global.b4.act"),
        MaxPool2D("global.b4.pool", (1, DCN_POOL)),
        Dropout("global.b4.drop", config.dropout_rate),
    ])
    classifier = Sequential("classifier", [
        Dense("classifier.out", d_g, 2, rng=rng, dtype=dtype, l2=l2),
    ])
    return EncoderStack(config, local, splitter, global_enc, classifier,
                        feature_shape=(1, w1), d1=d1, d_g=d_g)


def build_encoder(config: EncoderConfig, rng: np.random.Generator, *,
                  dtype=np.float32, l2: float = 0.1) -> EncoderStack:
    builder = build_eegnet if config.backbone == "eegnet" else build_deepconvnet
    return builder(config, rng, dtype=dtype, l2=l2)


def build_global_embedder(config: EncoderConfig, rng: np.random.Generator, *,
                          name: str = "tg.embed", dtype=np.float32,
                          l2: float = 0.1) -> Sequential:
    """Fresh layers with the global encoder's architecture (new parameters).

    Used by the global MI scorer, which embeds f_re through an E_g-shaped
    stack of its own before concatenating with f_g.
    """
    if config.backbone == "eegnet":
        f1 = config.base_depth
        d1 = f1 * EEGNET_DEPTH_MULTIPLIER
        return Sequential(name, [
            SeparableConv2D(f"{name}.sep", 1, EEGNET_SEPARABLE_LEN, d1, 1, d1,
                            rng=rng, dtype=dtype, l2=l2),
            BatchNorm(f"{name}.bn", d1, dtype=dtype),
            ELU(f"{name}.act"),
            Dropout(f"{name}.drop", config.dropout_rate),
        ])
    b = config.base_depth
    return Sequential(name, [
        Conv2D(f"{name}.conv", 1, DCN_TEMPORAL_LEN, 4 * b, 8 * b,
               rng=rng, dtype=dtype, l2=l2),
        BatchNorm(f"{name}.bn", 8 * b, dtype=dtype),
        ELU(f"{name}.act"),
        MaxPool2D(f"{name}.pool", (1, DCN_POOL)),
        Dropout(f"{name}.drop", config.dropout_rate),
    ])
