"""TRIALSET v1 container: one JSON header line, then fixed-size binary records.

Record layout per trial: row-major [n_c x n_t] little-endian float32 samples,
one byte of class index, two bytes of little-endian subject id.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .types import Trial

FORMAT_VERSION = 1


def write_trialset(path, trials: list[Trial],
                   class_names: tuple[str, str] = ("class_0", "class_1")) -> None:
    if not trials:
        raise ConfigurationError("cannot write an empty trial set")
    n_c, n_t = trials[0].n_c, trials[0].n_t
    rate = trials[0].sample_rate
    for i, t in enumerate(trials):
        if (t.n_c, t.n_t) != (n_c, n_t) or t.sample_rate != rate:
            raise ConfigurationError(
                f"trial {i} shape/rate {(t.n_c, t.n_t, t.sample_rate)} differs "
                f"from first trial {(n_c, n_t, rate)}"
            )
        if t.subject_id > 0xFFFF:
            raise ConfigurationError(f"subject id {t.subject_id} exceeds 2 bytes")
    header = {
        "version": FORMAT_VERSION,
        "n_trials": len(trials),
        "n_c": n_c,
        "n_t": n_t,
        "sample_rate": rate,
        "class_names": list(class_names),
        "subject_ids": sorted({t.subject_id for t in trials}),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for t in trials:
            fh.write(np.ascontiguousarray(t.x, dtype="<f4").tobytes())
            fh.write(struct.pack("<B", t.label))
            fh.write(struct.pack("<H", t.subject_id))


def read_trialset(path) -> list[Trial]:
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ConfigurationError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: unreadable header ({exc})") from exc
    if header.get("version") != FORMAT_VERSION:
        raise ConfigurationError(
            f"{path}: unsupported version {header.get('version')!r}"
        )
    n_trials, n_c, n_t = header["n_trials"], header["n_c"], header["n_t"]
    rate = header["sample_rate"]
    record = n_c * n_t * 4 + 1 + 2
    payload = raw[newline + 1:]
    if len(payload) != n_trials * record:
        raise ConfigurationError(
            f"{path}: payload is {len(payload)} bytes, expected "
            f"{n_trials * record} for {n_trials} trials"
        )
    trials = []
    for i in range(n_trials):
        chunk = payload[i * record:(i + 1) * record]
        x = np.frombuffer(chunk[:n_c * n_t * 4], dtype="<f4").reshape(n_c, n_t)
        label = chunk[n_c * n_t * 4]
        if label > 1:
            raise ConfigurationError(f"{path}: trial {i} has class byte {label}")
        (subject,) = struct.unpack("<H", chunk[-2:])
        y = np.zeros(2, dtype=np.float32)
        y[label] = 1.0
        trials.append(Trial(x=x.copy(), y=y, subject_id=subject, sample_rate=rate))
    return trials
