"""Mutual-information estimators: decomposition (M), local (T_l), global (T_g)."""

from .estimators import (
    GlobalScorer,
    LocalScorer,
    MIEstimator,
    PairBatch,
    PairScorer,
    build_decomposition_estimator,
    build_global_estimator,
    build_local_estimator,
    decomposition_loss,
    derangement,
    dv_mi_estimate,
    global_mi_loss,
    js_mi_objective,
    local_mi_loss,
    shuffle_marginals,
)

__all__ = [
    "GlobalScorer", "LocalScorer", "MIEstimator", "PairBatch", "PairScorer",
    "build_decomposition_estimator", "build_global_estimator",
    "build_local_estimator", "decomposition_loss", "derangement",
    "dv_mi_estimate", "global_mi_loss", "js_mi_objective", "local_mi_loss",
    "shuffle_marginals",
]
