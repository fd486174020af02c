"""Evaluation protocols: within-subject 5-fold (scenario I) and
leave-one-subject-out (scenario II) split planning."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import ProtocolError
from ..signal.types import Trial


@dataclass
class SplitRun:
    """Index sets into the trial list for one train/evaluate cycle."""

    tag: int                 # fold index (scenario I) or held-out subject (II)
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray


@dataclass
class ProtocolPlan:
    scenario: str            # "I" | "II"
    runs: list[SplitRun]
    fold_of: dict[int, int] = field(default_factory=dict)  # trial index -> fold

    def check_partition(self, n_trials: int) -> None:
        for run in self.runs:
            combined = np.concatenate([run.train_idx, run.val_idx, run.test_idx])
            if len(np.unique(combined)) != n_trials or len(combined) != n_trials:
                raise ProtocolError(
                    f"run {run.tag} is not a partition of {n_trials} trials"
                )


def _by_subject_class(trials: list[Trial]) -> dict[int, dict[int, list[int]]]:
    table: dict[int, dict[int, list[int]]] = {}
    for i, t in enumerate(trials):
        table.setdefault(t.subject_id, {0: [], 1: []})[t.label].append(i)
    return table


def plan_scenario1(trials: list[Trial], seed: int = 0,
                   n_folds: int = 5) -> ProtocolPlan:
    """Per-subject class-stratified folds; one run per held-out fold.

    Within the training folds each subject contributes train and validation
    trials at 7:1, again stratified by class.  A single model per run is
    trained on the union over subjects and tested on every subject's held
    fold.
    """
    rng = np.random.default_rng(seed)
    table = _by_subject_class(trials)
    folds: dict[int, list[int]] = {f: [] for f in range(n_folds)}
    fold_of: dict[int, int] = {}
    for subject in sorted(table):
        for label in (0, 1):
            idx = table[subject][label]
            if len(idx) < n_folds:
                raise ProtocolError(
                    f"subject {subject} has {len(idx)} trials of class {label}, "
                    f"needs >= {n_folds}"
                )
            order = rng.permutation(len(idx))
            for pos, j in enumerate(order):
                folds[pos % n_folds].append(idx[j])
                fold_of[idx[j]] = pos % n_folds

    runs = []
    for held in range(n_folds):
        test_idx = sorted(folds[held])
        train_idx: list[int] = []
        val_idx: list[int] = []
        for subject in sorted(table):
            for label in (0, 1):
                rest = [i for i in table[subject][label] if fold_of[i] != held]
                order = rng.permutation(len(rest))
                n_val = max(1, len(rest) // 8)
                chosen = [rest[j] for j in order]
                val_idx.extend(chosen[:n_val])
                train_idx.extend(chosen[n_val:])
        runs.append(SplitRun(
            tag=held,
            train_idx=np.array(sorted(train_idx)),
            val_idx=np.array(sorted(val_idx)),
            test_idx=np.array(test_idx),
        ))
    plan = ProtocolPlan(scenario="I", runs=runs, fold_of=fold_of)
    plan.check_partition(len(trials))
    return plan


def plan_scenario2(trials: list[Trial], seed: int = 0) -> list[ProtocolPlan]:
    """One single-run plan per held-out subject (zero-training transfer).

    The held-out subject contributes every trial to the test set and none
    anywhere else; the remaining subjects are carved 7:1 into train and
    validation, stratified by class within each subject.
    """
    table = _by_subject_class(trials)
    subjects = sorted(table)
    if len(subjects) < 2:
        raise ProtocolError(f"need >= 2 subjects, got {len(subjects)}")
    rng = np.random.default_rng(seed)
    plans = []
    for held in subjects:
        test_idx = sorted(i for i, t in enumerate(trials) if t.subject_id == held)
        train_idx: list[int] = []
        val_idx: list[int] = []
        for subject in subjects:
            if subject == held:
                continue
            for label in (0, 1):
                idx = table[subject][label]
                order = rng.permutation(len(idx))
                n_val = max(1, len(idx) // 8)
                chosen = [idx[j] for j in order]
                val_idx.extend(chosen[:n_val])
                train_idx.extend(chosen[n_val:])
        run = SplitRun(tag=held, train_idx=np.array(sorted(train_idx)),
                       val_idx=np.array(sorted(val_idx)),
                       test_idx=np.array(test_idx))
        plan = ProtocolPlan(scenario="II", runs=[run])
        plan.check_partition(len(trials))
        plans.append(plan)
    return plans


def trial_hash(trial: Trial) -> str:
    """Content hash used by the leakage check."""
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(trial.x, dtype="<f4").tobytes())
    h.update(bytes([trial.label]))
    h.update(int(trial.subject_id).to_bytes(2, "little"))
    return h.hexdigest()
