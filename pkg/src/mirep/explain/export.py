"""Plot-ready CSV exports: feature embeddings, topomaps, class PSDs."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import ConfigurationError
from ..model import EncoderStack, forward
from ..signal.psd import welch_psd
from ..signal.types import Trial
from .topo import TopoVector

FEATURE_KINDS = ("f_ir", "f_re", "f_g")


def _feature_rows(model: EncoderStack, trials: list[Trial],
                  batch: int = 256) -> dict[str, np.ndarray]:
    feats: dict[str, list[np.ndarray]] = {k: [] for k in FEATURE_KINDS}
    for start in range(0, len(trials), batch):
        chunk = trials[start:start + batch]
        xs = np.stack([t.x for t in chunk])
        bundle, _ = forward(xs, model, train=False)
        n = len(chunk)
        feats["f_ir"].append(bundle.f_ir.data.reshape(n, -1))
        feats["f_re"].append(bundle.f_re.data.reshape(n, -1))
        feats["f_g"].append(bundle.f_g.data.reshape(n, -1))
    return {k: np.concatenate(v).astype(np.float32) for k, v in feats.items()}


def export_embeddings(path, model: EncoderStack, trials: list[Trial]) -> None:
    """Per-trial flattened features for external projection tools.

    One row per trial per feature kind: kind, subject_id, class, then that
    kind's feature values.  The header is sized to the widest kind; rows of
    narrower kinds simply end early.
    """
    if not trials:
        raise ConfigurationError("no trials to export")
    feats = _feature_rows(model, trials)
    width = max(arr.shape[1] for arr in feats.values())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "subject_id", "class"]
                        + [f"dim_{i}" for i in range(width)])
        for kind in FEATURE_KINDS:
            arr = feats[kind]
            for i, trial in enumerate(trials):
                writer.writerow([kind, trial.subject_id, trial.label]
                                + [repr(float(v)) for v in arr[i]])


def read_embeddings(path) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Parse an embedding dump back to (features, subjects, classes) per kind."""
    rows: dict[str, list[tuple[int, int, list[float]]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["kind", "subject_id", "class"]:
            raise ConfigurationError(f"unexpected embedding header {header[:3]}")
        for row in reader:
            kind, subject, label = row[0], int(row[1]), int(row[2])
            rows.setdefault(kind, []).append(
                (subject, label, [float(v) for v in row[3:]]))
    out = {}
    for kind, entries in rows.items():
        widths = {len(vals) for _, _, vals in entries}
        if len(widths) > 1:
            raise ConfigurationError(
                f"kind {kind} rows disagree on width: {sorted(widths)}"
            )
        out[kind] = (
            np.array([vals for _, _, vals in entries], dtype=np.float32),
            np.array([s for s, _, _ in entries]),
            np.array([c for _, c, _ in entries]),
        )
    return out


def write_topomap_csv(path, topo: TopoVector) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "relevance"])
        for channel, value in enumerate(topo.values):
            writer.writerow([channel, repr(float(value))])


def write_psd_csv(path, trials: list[Trial],
                  segment_len: int | None = None) -> None:
    """Welch PSD averaged over trials, one row per class/channel/frequency."""
    if not trials:
        raise ConfigurationError("no trials for PSD export")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "channel", "freq_hz", "power"])
        for label in (0, 1):
            members = [t for t in trials if t.label == label]
            if not members:
                continue
            spectra = [welch_psd(t, segment_len=segment_len) for t in members]
            freqs = spectra[0].frequencies
            mean_power = np.mean([p.power for p in spectra], axis=0)
            for channel in range(mean_power.shape[0]):
                for f, p in zip(freqs, mean_power[channel]):
                    writer.writerow([label, channel, repr(float(f)),
                                     repr(float(p))])
