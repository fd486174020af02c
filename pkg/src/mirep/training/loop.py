"""Composite objective and the end-to-end fit loop.

One minimizing optimizer updates every module — encoders, splitter,
classifier, M, T_l, T_g.  The decomposition term carries its min-max inside
via gradient reversal; the two DIM objectives are negated here so that
minimizing the composite maximizes them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..diffcore import DiffTensor, Tape, backward, ops
from ..errors import BatchSizeError, ConfigurationError, NumericAbort
from ..miestim import (
    MIEstimator,
    decomposition_loss,
    global_mi_loss,
    local_mi_loss,
)
from ..model.encoders import EncoderStack, forward
from ..signal.types import Trial
from .optimizer import OptimizerState, lr_at_epoch, optimizer_step


@dataclass
class LossWeights:
    """Weights of the classification, decomposition, and DIM terms."""

    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.5

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigurationError(
                f"loss weights must be nonnegative, got "
                f"({self.alpha}, {self.beta}, {self.gamma})"
            )


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 40
    lr: float = 1e-3
    lr_decay_per_epoch: float = 0.99
    l2: float = 0.1
    dropout: float = 0.5
    seed: int = 0
    patience: int = 20

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigurationError(
                f"batch_size must be >= 2 (marginal shuffling), got {self.batch_size}"
            )
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2 < 0 or not 0 <= self.dropout < 1:
            raise ConfigurationError(
                f"need l2 >= 0 and dropout in [0, 1), got {self.l2}, {self.dropout}"
            )
        if not 0 < self.lr_decay_per_epoch <= 1:
            raise ConfigurationError(
                f"lr_decay_per_epoch must lie in (0, 1], got {self.lr_decay_per_epoch}"
            )


@dataclass
class StepRecord:
    epoch: int
    l_cls: float
    l_dec: float
    l_local: float
    l_global: float
    total: float


@dataclass
class EpochRecord:
    epoch: int
    l_cls: float
    l_dec: float
    l_local: float
    l_global: float
    total: float
    val_acc: float
    val_loss: float
    lr: float


@dataclass
class History:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)


@dataclass
class FitResult:
    history: History
    best_epoch: int
    best_val_loss: float
    best_val_acc: float


def total_objective(l_cls: DiffTensor, l_dec: DiffTensor | None,
                    l_dim: DiffTensor | None, weights: LossWeights,
                    params=()) -> DiffTensor:
    """alpha*L_cls + beta*L_dec + gamma*L_dim plus the weight-decay penalty.

    ``l_dim`` must already be the negated sum of the local and global MI
    objectives.  The l2 penalty uses each parameter's own coefficient and is
    not scaled by the loss weights.
    """
    for name, term in (("l_cls", l_cls), ("l_dec", l_dec), ("l_dim", l_dim)):
        if term is not None and term.data.size != 1:
            raise ConfigurationError(f"{name} must be scalar, got shape {term.shape}")
    total = ops.scale(l_cls, weights.alpha)
    if l_dec is not None and weights.beta > 0:
        total = ops.add(total, ops.scale(l_dec, weights.beta))
    if l_dim is not None and weights.gamma > 0:
        total = ops.add(total, ops.scale(l_dim, weights.gamma))
    for p in params:
        if p.l2_coefficient > 0:
            total = ops.add(total, ops.scale(ops.sq_sum(p.tensor), p.l2_coefficient))
    return total


def make_minibatches(trials, batch_size: int,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index batches over the pooled trials, subject-agnostic.

    The final short batch is dropped only when it has a single trial, since
    the MI losses need at least two samples.
    """
    n = len(trials)
    if n == 0:
        raise ConfigurationError("empty trial set")
    if n < batch_size:
        raise ConfigurationError(
            f"trial count {n} is below the batch size {batch_size}"
        )
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches[-1]) < 2:
        batches.pop()
    return batches


def _stack(trials: list[Trial]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = np.stack([t.x for t in trials]).astype(np.float32)
    ys = np.stack([t.y for t in trials]).astype(np.float32)
    labels = ys.argmax(axis=1)
    return xs, ys, labels


def _cross_entropy(logits: np.ndarray, onehot: np.ndarray) -> float:
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    return float((lse - (logits * onehot).sum(axis=1)).mean())


def evaluate(model: EncoderStack, trials: list[Trial],
             batch: int = 256) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) in eval mode, no gradients recorded."""
    xs, ys, labels = _stack(trials)
    logits = np.concatenate([
        forward(xs[i:i + batch], model)[0].logits.data
        for i in range(0, len(xs), batch)
    ])
    loss = _cross_entropy(logits.astype(np.float64), ys)
    acc = float((logits.argmax(axis=1) == labels).mean())
    return loss, acc


def _snapshot(model: EncoderStack, extra_params) -> dict[str, np.ndarray]:
    shot = {p.name: p.data.copy() for p in model.parameters()}
    shot.update({n: a.copy() for n, a in model.state_arrays().items()})
    shot.update({p.name: p.data.copy() for p in extra_params})
    return shot


def _restore(model: EncoderStack, extra_params, shot: dict[str, np.ndarray]) -> None:
    for p in model.parameters():
        p.tensor.data = shot[p.name].copy()
    for name, arr in model.state_arrays().items():
        arr[...] = shot[name]
    for p in extra_params:
        p.tensor.data = shot[p.name].copy()


def fit(model: EncoderStack, estimators: dict[str, MIEstimator | None],
        train_trials: list[Trial], val_trials: list[Trial],
        config: TrainConfig, weights: LossWeights = LossWeights()) -> FitResult:
    """Train all components jointly; return history with best-val weights loaded.

    ``estimators`` maps "m"/"local"/"global" to estimators or None; a term is
    active when its weight is positive and its estimator is present.
    Inactive terms are logged as 0.0 in the history.
    """
    if not val_trials:
        raise ConfigurationError("fit requires a non-empty validation set")
    xs, ys, _ = _stack(train_trials)

    m_est = estimators.get("m") if weights.beta > 0 else None
    l_est = estimators.get("local") if weights.gamma > 0 else None
    g_est = estimators.get("global") if weights.gamma > 0 else None

    params = list(model.parameters())
    for est in (m_est, l_est, g_est):
        if est is not None:
            params.extend(est.parameters())

    rng = np.random.default_rng(config.seed)
    state = OptimizerState(params)
    history = History()
    best = {"val_loss": np.inf, "val_acc": 0.0, "epoch": -1, "shot": None}
    model_ids = {id(p) for p in model.parameters()}
    extra = [p for p in params if id(p) not in model_ids]
    stale = 0

    for epoch in range(config.epochs):
        lr = lr_at_epoch(config.lr, config.lr_decay_per_epoch, epoch)
        sums = np.zeros(5)
        batches = make_minibatches(train_trials, config.batch_size, rng)
        for idx in batches:
            for p in params:
                p.zero_grad()
            with Tape():
                bundle, _ = forward(xs[idx], model, train=True, rng=rng)
                l_cls = ops.softmax_cross_entropy(bundle.logits, ys[idx])
                l_dec = (decomposition_loss(bundle.f_re, bundle.f_ir, m_est, rng)
                         if m_est is not None else None)
                l_loc = (local_mi_loss(bundle.f_g, bundle.f_re, l_est, rng, train=True)
                         if l_est is not None else None)
                l_glob = (global_mi_loss(bundle.f_g, bundle.f_re, g_est, rng, train=True)
                          if g_est is not None else None)
                dim_parts = [t for t in (l_loc, l_glob) if t is not None]
                l_dim = None
                if dim_parts:
                    summed = dim_parts[0]
                    for t in dim_parts[1:]:
                        summed = ops.add(summed, t)
                    l_dim = ops.neg(summed)
                total = total_objective(l_cls, l_dec, l_dim, weights, params)
            if not np.isfinite(total.data):
                raise NumericAbort(f"non-finite objective at epoch {epoch}")
            backward(total)
            optimizer_step(params, None, state, lr)
            rec = StepRecord(
                epoch=epoch,
                l_cls=float(l_cls.data),
                l_dec=float(l_dec.data) if l_dec is not None else 0.0,
                l_local=float(l_loc.data) if l_loc is not None else 0.0,
                l_global=float(l_glob.data) if l_glob is not None else 0.0,
                total=float(total.data),
            )
            history.steps.append(rec)
            sums += (rec.l_cls, rec.l_dec, rec.l_local, rec.l_global, rec.total)
        means = sums / len(batches)
        val_loss, val_acc = evaluate(model, val_trials)
        history.epochs.append(EpochRecord(
            epoch=epoch, l_cls=float(means[0]), l_dec=float(means[1]),
            l_local=float(means[2]), l_global=float(means[3]),
            total=float(means[4]), val_acc=val_acc, val_loss=val_loss, lr=lr,
        ))
        if val_loss < best["val_loss"]:
            best.update(val_loss=val_loss, val_acc=val_acc, epoch=epoch,
                        shot=_snapshot(model, extra))
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if best["shot"] is not None:
        _restore(model, extra, best["shot"])
    return FitResult(history=history, best_epoch=best["epoch"],
                     best_val_loss=best["val_loss"], best_val_acc=best["val_acc"])


def write_history_csv(path, history: History) -> None:
    """One row per epoch: losses, validation accuracy, learning rate."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "L_cls", "L_dec", "L_local", "L_global",
                         "total", "val_acc", "lr"])
        for rec in history.epochs:
            writer.writerow([rec.epoch, repr(rec.l_cls), repr(rec.l_dec),
                             repr(rec.l_local), repr(rec.l_global),
                             repr(rec.total), repr(rec.val_acc), repr(rec.lr)])
