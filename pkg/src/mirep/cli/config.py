"""Run configuration: one JSON document resolved from defaults, file, flags.

Resolution order is defaults, then the --config file, then dedicated flags,
then --set key=value pairs.  The fully resolved document is written next to
every command's outputs as an audit trail, and unknown keys anywhere are
rejected rather than ignored.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigurationError
from ..model import EncoderConfig
from ..signal.types import CohortSpec, Trial
from ..training import LossWeights, TrainConfig

_COHORT_FIELDS = ("num_subjects", "trials_per_class", "n_c", "n_t",
                  "sample_rate", "class_band", "class_gain", "tilt_range",
                  "mixing_strength", "noise_floor")
_TRAIN_FIELDS = ("epochs", "batch_size", "lr", "lr_decay_per_epoch", "l2",
                 "dropout", "patience")


def default_config() -> dict:
    cohort = CohortSpec()
    train = TrainConfig()
    weights = LossWeights()
    return {
        "seed": 0,
        "out": "runs/latest",
        "variant": "IV",
        "baseline": None,
        "cohort": {f: getattr(cohort, f) for f in _COHORT_FIELDS},
        "encoder": {"backbone": "eegnet", "base_depth": None},
        "weights": {"alpha": weights.alpha, "beta": weights.beta,
                    "gamma": weights.gamma},
        "train": {f: getattr(train, f) for f in _TRAIN_FIELDS},
        "protocol": {"scenario": 1, "n_folds": 5},
    }


def _merge(base: dict, incoming: dict, prefix: str = "") -> None:
    for key, value in incoming.items():
        if key not in base:
            raise ConfigurationError(f"unknown config key {prefix + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(
                    f"config key {prefix + key!r} must be a section"
                )
            _merge(base[key], value, prefix + key + ".")
        else:
            base[key] = value


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: config root must be an object")
    return doc


def apply_set_overrides(config: dict, pairs: list[str]) -> None:
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigurationError(f"unknown config section {part!r} in {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigurationError(f"unknown config key {key!r}")
        if isinstance(node[parts[-1]], dict):
            raise ConfigurationError(f"config key {key!r} is a section, not a value")
        node[parts[-1]] = value


def parse_weights(text: str) -> dict:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigurationError(f"--weights expects a,b,c, got {text!r}")
    try:
        alpha, beta, gamma = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigurationError(f"--weights values must be numbers: {exc}") from exc
    return {"alpha": alpha, "beta": beta, "gamma": gamma}


def resolve_config(args) -> dict:
    """Defaults, then config file, then dedicated flags, then --set pairs."""
    config = default_config()
    if getattr(args, "config", None):
        _merge(config, load_config_file(args.config))
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        config["out"] = args.out
    if getattr(args, "backbone", None) is not None:
        config["encoder"]["backbone"] = args.backbone
    if getattr(args, "scenario", None) is not None:
        config["protocol"]["scenario"] = args.scenario
    if getattr(args, "variant", None) is not None:
        config["variant"] = args.variant
    if getattr(args, "weights", None) is not None:
        config["weights"] = parse_weights(args.weights)
    if getattr(args, "baseline", None) is not None:
        config["baseline"] = args.baseline
    apply_set_overrides(config, getattr(args, "set", None) or [])
    return config


def write_resolved_config(out_dir, config: dict) -> Path:
    path = Path(out_dir) / "resolved_config.json"
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cohort_spec_from(config: dict) -> CohortSpec:
    section = dict(config["cohort"])
    section["class_band"] = tuple(section["class_band"])
    return CohortSpec(seed=config["seed"], **section)


def train_config_from(config: dict) -> TrainConfig:
    return TrainConfig(seed=config["seed"], **config["train"])


def weights_from(config: dict) -> LossWeights:
    return LossWeights(**config["weights"])


def encoder_config_from(config: dict, trials: list[Trial]) -> EncoderConfig:
    if not trials:
        raise ConfigurationError("trialset is empty")
    first = trials[0]
    return EncoderConfig(
        backbone=config["encoder"]["backbone"],
        n_c=first.n_c,
        n_t=first.n_t,
        sample_rate=first.sample_rate,
        base_depth=config["encoder"]["base_depth"],
        dropout_rate=config["train"]["dropout"],
    )
