"""Protocol execution: one training run per split, ablation grid on top."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigurationError
from ..miestim import (MIEstimator, build_decomposition_estimator,
                       build_global_estimator, build_local_estimator)
from ..model import EncoderConfig, EncoderStack, build_encoder
from ..signal.types import Trial
from ..training import FitResult, LossWeights, TrainConfig, evaluate, fit
from .protocol import ProtocolPlan, SplitRun
from .results import ResultRow, ResultTable, aggregate


@dataclass(frozen=True)
class AblationVariant:
    """Which regularizers train alongside the classifier."""

    name: str
    use_decomposition: bool
    use_local: bool
    use_global: bool


VARIANTS = {
    "pooled": AblationVariant("pooled", False, False, False),
    "I": AblationVariant("I", True, False, False),
    "II": AblationVariant("II", True, False, True),
    "III": AblationVariant("III", True, True, False),
    "IV": AblationVariant("IV", True, True, True),
}

_COMPONENT_STREAMS = {"model": 0, "m": 1, "local": 2, "global": 3, "fit": 4}


def variant_by_name(name: str) -> AblationVariant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown variant {name!r}, choose from {sorted(VARIANTS)}"
        ) from None


def _component_rng(base_seed: int, run_index: int,
                   component: str) -> np.random.Generator:
    """Per-component stream so shared parts match across variants."""
    return np.random.default_rng(
        [base_seed, run_index, _COMPONENT_STREAMS[component]]
    )


def build_components(encoder_config: EncoderConfig, train_config: TrainConfig,
                     variant: AblationVariant, base_seed: int = 0,
                     run_index: int = 0,
                     ) -> tuple[EncoderStack, dict[str, MIEstimator | None]]:
    """Encoder stack plus the estimators the variant calls for.

    The train config supplies dropout and weight decay; each component draws
    its initial weights from its own seed stream, so the encoder (and any
    estimator present in two variants) starts identically in both.
    """
    cfg = replace(encoder_config, dropout_rate=train_config.dropout)
    model = build_encoder(cfg, _component_rng(base_seed, run_index, "model"),
                          l2=train_config.l2)
    h1, w1 = model.feature_shape
    estimators: dict[str, MIEstimator | None] = {
        "m": None, "local": None, "global": None,
    }
    if variant.use_decomposition:
        estimators["m"] = build_decomposition_estimator(
            h1 * w1 * model.d1, _component_rng(base_seed, run_index, "m"),
            l2=train_config.l2)
    if variant.use_local:
        estimators["local"] = build_local_estimator(
            model.d1, model.d_g, _component_rng(base_seed, run_index, "local"),
            l2=train_config.l2)
    if variant.use_global:
        estimators["global"] = build_global_estimator(
            cfg, model.d_g, _component_rng(base_seed, run_index, "global"),
            l2=train_config.l2)
    return model, estimators


def _mask_weights(weights: LossWeights, variant: AblationVariant) -> LossWeights:
    beta = weights.beta if variant.use_decomposition else 0.0
    gamma = weights.gamma if (variant.use_local or variant.use_global) else 0.0
    return LossWeights(weights.alpha, beta, gamma)


def _subject_rows(model: EncoderStack, trials: list[Trial],
                  test_idx, scenario: str, variant_name: str,
                  fold: int) -> list[ResultRow]:
    by_subject: dict[int, list[Trial]] = {}
    for i in test_idx:
        by_subject.setdefault(trials[i].subject_id, []).append(trials[i])
    rows = []
    for subject in sorted(by_subject):
        _, acc = evaluate(model, by_subject[subject])
        rows.append(ResultRow(
            scenario=scenario, backbone=model.config.backbone,
            variant=variant_name, subject_id=subject, fold=fold, accuracy=acc,
        ))
    return rows


def run_split(trials: list[Trial], run: SplitRun, scenario: str,
              encoder_config: EncoderConfig, train_config: TrainConfig,
              weights: LossWeights, variant: AblationVariant,
              base_seed: int = 0, run_index: int = 0,
              ) -> tuple[list[ResultRow], FitResult, EncoderStack]:
    """Train on one split and score the test set per subject."""
    model, estimators = build_components(
        encoder_config, train_config, variant, base_seed, run_index)
    fit_seed = int(np.random.SeedSequence(
        [base_seed, run_index, _COMPONENT_STREAMS["fit"]]).generate_state(1)[0])
    result = fit(model, estimators,
                 [trials[i] for i in run.train_idx],
                 [trials[i] for i in run.val_idx],
                 replace(train_config, seed=fit_seed),
                 _mask_weights(weights, variant))
    fold = run.tag if scenario == "I" else 0
    rows = _subject_rows(model, trials, run.test_idx, scenario,
                         variant.name, fold)
    return rows, result, model


def run_protocol(trials: list[Trial],
                 plans: ProtocolPlan | list[ProtocolPlan],
                 encoder_config: EncoderConfig, train_config: TrainConfig,
                 weights: LossWeights = LossWeights(),
                 variant: str | AblationVariant = "IV",
                 base_seed: int = 0) -> ResultTable:
    """One fit per split run; result rows carry per-subject test accuracy."""
    if isinstance(variant, str):
        variant = variant_by_name(variant)
    plan_list = [plans] if isinstance(plans, ProtocolPlan) else list(plans)
    if not plan_list:
        raise ConfigurationError("no protocol plans given")
    rows: list[ResultRow] = []
    run_index = 0
    for plan in plan_list:
        for run in plan.runs:
            split_rows, _, _ = run_split(
                trials, run, plan.scenario, encoder_config, train_config,
                weights, variant, base_seed, run_index)
            rows.extend(split_rows)
            run_index += 1
    return aggregate(rows)


def run_ablation(trials: list[Trial],
                 plans: ProtocolPlan | list[ProtocolPlan],
                 encoder_config: EncoderConfig, train_config: TrainConfig,
                 weights: LossWeights = LossWeights(),
                 variant_names: tuple[str, ...] = ("I", "II", "III", "IV"),
                 base_seed: int = 0) -> dict[str, ResultTable]:
    """Every variant on the same splits and the same component seeds."""
    return {
        name: run_protocol(trials, plans, encoder_config, train_config,
                           weights, name, base_seed)
        for name in variant_names
    }
