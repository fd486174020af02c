"""Checkpoint container: JSON manifest line + float32 payload in manifest order.

The manifest records the encoder config, the training seed and epoch, and
the name/shape of every stored array (trainable parameters first, then
batch-norm running statistics), so the payload can be validated byte for
byte before any array is copied in.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .encoders import EncoderConfig, EncoderStack, build_encoder


def _array_entries(model: EncoderStack) -> list[tuple[str, np.ndarray]]:
    entries = [(p.name, p.data) for p in model.parameters()]
    entries.extend(model.state_arrays().items())
    return entries


def save_checkpoint(path, model: EncoderStack, *, seed: int, epoch: int) -> None:
    entries = _array_entries(model)
    manifest = {
        "config": asdict(model.config),
        "seed": int(seed),
        "epoch": int(epoch),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in entries],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path, *, dtype=np.float32) -> tuple[EncoderStack, dict]:
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ConfigurationError(f"{path}: missing manifest line")
    try:
        manifest = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: unreadable manifest ({exc})") from exc
    config = EncoderConfig(**manifest["config"])
    model = build_encoder(config, np.random.default_rng(0), dtype=dtype)
    entries = _array_entries(model)
    listed = manifest["arrays"]
    if [e["name"] for e in listed] != [n for n, _ in entries]:
        raise ConfigurationError(
            f"{path}: manifest arrays do not match the rebuilt model"
        )
    expected = sum(int(np.prod(e["shape"])) * 4 for e in listed)
    payload = raw[newline + 1:]
    if len(payload) != expected:
        raise ConfigurationError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    offset = 0
    for entry, (name, arr) in zip(listed, entries):
        shape = tuple(entry["shape"])
        if shape != arr.shape:
            raise ConfigurationError(
                f"{path}: array {name} has shape {shape}, model expects {arr.shape}"
            )
        count = int(np.prod(shape)) * 4
        values = np.frombuffer(payload[offset:offset + count], dtype="<f4")
        arr[...] = values.reshape(shape).astype(arr.dtype)
        offset += count
    return model, manifest
