"""Encoder stacks for both backbones plus checkpoint I/O."""

from .encoders import (
    EncoderConfig,
    EncoderStack,
    FeatureBundle,
    build_deepconvnet,
    build_eegnet,
    build_encoder,
    decompose,
    forward,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "EncoderConfig", "EncoderStack", "FeatureBundle", "build_deepconvnet",
    "build_eegnet", "build_encoder", "decompose", "forward",
    "load_checkpoint", "save_checkpoint",
]
