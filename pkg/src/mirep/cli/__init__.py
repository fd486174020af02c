"""Command-line interface wiring."""

from .config import (apply_set_overrides, cohort_spec_from, default_config,
                     encoder_config_from, load_config_file, parse_weights,
                     resolve_config, train_config_from, weights_from,
                     write_resolved_config)
from .main import build_parser, main

__all__ = [
    "apply_set_overrides",
    "build_parser",
    "cohort_spec_from",
    "default_config",
    "encoder_config_from",
    "load_config_file",
    "main",
    "parse_weights",
    "resolve_config",
    "train_config_from",
    "weights_from",
    "write_resolved_config",
]
