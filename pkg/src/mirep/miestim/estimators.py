"""Mutual-information estimators over feature pairs.

Three scorers are used during training, all with the softplus JS objective
(its maximizer tightens a Jensen-Shannon surrogate of MI):

* M scores (f_re, f_ir) pairs for the decomposition loss, where a min-max
  is enacted through gradient reversal and a single minimizing optimizer;
* T_l scores every spatial patch of f_re against the global feature through
  a 1x1 concat-and-convolve stack;
* T_g scores f_re embedded by a fresh global-encoder-shaped stack against
  the global feature.

The Donsker-Varadhan form is kept as a calibration diagnostic: trained to
convergence it lower-bounds MI in nats and can be checked against the
closed-form Gaussian value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import DiffTensor, ops
from ..diffcore.layers import Dense, ELU, Sequential
from ..diffcore.ops import glorot_uniform
from ..diffcore.tensor import Parameter
from ..errors import BatchSizeError, ContractError, DimensionError
from ..model.encoders import EncoderConfig, build_global_embedder


@dataclass
class PairBatch:
    """Aligned pairs plus the permutation that builds the marginal pairs.

    ``joint`` pairs are (a_i, b_i); ``marginal`` pairs are (a_i, b_perm[i]).
    The permutation is a derangement, so no marginal pair is secretly joint.
    """

    a: DiffTensor
    b: DiffTensor
    perm: np.ndarray

    @property
    def size(self) -> int:
        return self.a.shape[0]


def derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform permutation resampled until it has no fixed point."""
    if n < 2:
        raise BatchSizeError(f"need a batch of >= 2 to shuffle, got {n}")
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            return perm


def shuffle_marginals(batch: tuple, rng: np.random.Generator) -> PairBatch:
    """Pair a batch (a, b) with a deranged copy of b for the marginal term."""
    a, b = batch
    a = a if isinstance(a, DiffTensor) else DiffTensor(np.asarray(a))
    b = b if isinstance(b, DiffTensor) else DiffTensor(np.asarray(b))
    if a.shape[0] != b.shape[0]:
        raise DimensionError(
            f"batch axes differ: a has {a.shape[0]}, b has {b.shape[0]}"
        )
    return PairBatch(a=a, b=b, perm=derangement(a.shape[0], rng))


class PairScorer:
    """Flatten-concatenate-dense scorer mapping a pair to one scalar."""

    def __init__(self, in_features: int, hidden: tuple[int, ...],
                 rng: np.random.Generator, *, name: str = "m",
                 dtype=np.float32, l2: float = 0.0):
        sizes = (in_features,) + tuple(hidden)
        stages: list = []
        for i in range(len(hidden)):
            stages.append(Dense(f"{name}.dense{i}", sizes[i], sizes[i + 1],
                                rng=rng, dtype=dtype, l2=l2))
            stages.append(ELU(f"{name}.act{i}"))
        stages.append(Dense(f"{name}.out", sizes[-1], 1, rng=rng, dtype=dtype, l2=l2))
        self.net = Sequential(name, stages)

    def parameters(self):
        return self.net.parameters()

    def score(self, a: DiffTensor, b: DiffTensor) -> DiffTensor:
        pair = ops.concat([ops.flatten(a), ops.flatten(b)], axis=1)
        return self.net(pair)


class LocalScorer:
    """1x1 concat-and-convolve stack scoring each patch of f_re against f_g.

    The first kernel is shaped [1, 1, d1 + d_g, hidden] exactly as if the
    replicated global feature were depth-concatenated with f_re; the forward
    pass splits that kernel and adds the two projections instead, which is
    algebraically identical and avoids materializing the [B, h1, w1, d_g]
    replication.
    """

    def __init__(self, d1: int, d_g: int, hidden: int,
                 rng: np.random.Generator, *, name: str = "tl",
                 dtype=np.float32, l2: float = 0.0):
        self.d1, self.d_g = d1, d_g
        fan = d1 + d_g
        self.kernel0 = Parameter(
            f"{name}.kernel0",
            glorot_uniform(rng, (1, 1, fan, hidden), fan, hidden, dtype),
            l2_coefficient=l2,
        )
        self.kernel1 = Parameter(
            f"{name}.kernel1",
            glorot_uniform(rng, (1, 1, hidden, 1), hidden, 1, dtype),
            l2_coefficient=l2,
        )

    def parameters(self):
        return [self.kernel0, self.kernel1]

    def score_map(self, f_re: DiffTensor, f_g: DiffTensor,
                  row_order: np.ndarray | None = None) -> DiffTensor:
        """[B, h1, w1, 1] score map; ``row_order`` permutes f_g for marginals."""
        k = self.kernel0.tensor
        k_re = ops.slice_axis(k, 2, 0, self.d1)
        k_g = ops.reshape(ops.slice_axis(k, 2, self.d1, self.d1 + self.d_g),
                          (self.d_g, k.shape[3]))
        patch_part = ops.conv2d(f_re, k_re)
        g_part = ops.matmul(f_g, k_g)
        if row_order is not None:
            g_part = ops.take_rows(g_part, row_order)
        pre = ops.broadcast_add_sample(patch_part, g_part)
        return ops.conv2d(ops.elu(pre), self.kernel1.tensor)


class GlobalScorer:
    """Embed f_re through a fresh E_g-shaped stack, concat with f_g, score."""

    def __init__(self, config: EncoderConfig, d_g: int,
                 rng: np.random.Generator, *, name: str = "tg",
                 dtype=np.float32, l2: float = 0.0):
        self.embedder = build_global_embedder(config, rng, name=f"{name}.embed",
                                              dtype=dtype, l2=l2)
        self.out = Dense(f"{name}.out", 2 * d_g, 1, rng=rng, dtype=dtype, l2=l2)

    def parameters(self):
        return self.embedder.parameters() + self.out.parameters()

    def embed(self, f_re: DiffTensor, *, train: bool = False,
              rng: np.random.Generator | None = None) -> DiffTensor:
        return ops.flatten(self.embedder(f_re, train=train, rng=rng))

    def score(self, embedded: DiffTensor, f_g: DiffTensor) -> DiffTensor:
        return self.out(ops.concat([embedded, f_g], axis=1))


@dataclass
class MIEstimator:
    """A scorer network tagged with its role and objective form."""

    kind: str             # "M" | "T_l" | "T_g"
    objective_form: str   # "JS" | "DV"
    scorer: object

    def __post_init__(self):
        if self.kind not in ("M", "T_l", "T_g"):
            raise ContractError(f"unknown estimator kind {self.kind!r}")
        if self.objective_form not in ("JS", "DV"):
            raise ContractError(f"unknown objective form {self.objective_form!r}")

    def parameters(self):
        return self.scorer.parameters()


def build_decomposition_estimator(feature_size: int, rng: np.random.Generator, *,
                                  hidden: tuple[int, ...] = (256,),
                                  dtype=np.float32, l2: float = 0.0,
                                  objective_form: str = "JS") -> MIEstimator:
    scorer = PairScorer(2 * feature_size, hidden, rng, name="m", dtype=dtype, l2=l2)
    return MIEstimator(kind="M", objective_form=objective_form, scorer=scorer)


def build_local_estimator(d1: int, d_g: int, rng: np.random.Generator, *,
                          hidden: int = 64, dtype=np.float32,
                          l2: float = 0.0) -> MIEstimator:
    scorer = LocalScorer(d1, d_g, hidden, rng, name="tl", dtype=dtype, l2=l2)
    return MIEstimator(kind="T_l", objective_form="JS", scorer=scorer)


def build_global_estimator(config: EncoderConfig, d_g: int,
                           rng: np.random.Generator, *, dtype=np.float32,
                           l2: float = 0.0) -> MIEstimator:
    scorer = GlobalScorer(config, d_g, rng, name="tg", dtype=dtype, l2=l2)
    return MIEstimator(kind="T_g", objective_form="JS", scorer=scorer)


def _check_pairs(pairs: PairBatch) -> None:
    if pairs.size < 2:
        raise BatchSizeError(f"pair batch must have >= 2 samples, got {pairs.size}")


def js_mi_objective(est: MIEstimator, pairs: PairBatch) -> DiffTensor:
    """mean_joint[-sp(-T)] - mean_marginal[sp(T)]; maximize to tighten MI.

    Equals -sp(-c) - sp(c) for a constant scorer c (so -2 ln 2 at c = 0).
    """
    if est.objective_form != "JS":
        raise ContractError(f"estimator has objective {est.objective_form}, need JS")
    _check_pairs(pairs)
    t_joint = est.scorer.score(pairs.a, pairs.b)
    t_marg = est.scorer.score(pairs.a, ops.take_rows(pairs.b, pairs.perm))
    return _js_from_scores(t_joint, t_marg)


def _js_from_scores(t_joint: DiffTensor, t_marg: DiffTensor) -> DiffTensor:
    joint_term = ops.mean_all(ops.neg(ops.softplus(ops.neg(t_joint))))
    marg_term = ops.mean_all(ops.softplus(t_marg))
    return ops.sub(joint_term, marg_term)


def dv_mi_estimate(est: MIEstimator, pairs: PairBatch) -> DiffTensor:
    """mean_joint(T) - log(mean_marginal(exp T)), the DV lower bound in nats."""
    if est.objective_form != "DV":
        raise ContractError(f"estimator has objective {est.objective_form}, need DV")
    _check_pairs(pairs)
    t_joint = est.scorer.score(pairs.a, pairs.b)
    t_marg = est.scorer.score(pairs.a, ops.take_rows(pairs.b, pairs.perm))
    return ops.sub(ops.mean_all(t_joint), ops.logmeanexp(t_marg))


def decomposition_loss(f_re: DiffTensor, f_ir: DiffTensor, est: MIEstimator,
                       rng: np.random.Generator) -> DiffTensor:
    """JS objective on (f_re, f_ir) wired for the min-max via gradient reversal.

    The value equals the JS objective itself.  Both inputs pass through a
    reversal before M and both score tensors pass through a reversal after
    M, so under one minimizing optimizer M's parameters ascend the objective
    (estimator tightens) while the upstream encoder and splitter descend it
    (their two reversals cancel), which is the decomposition min-max.
    """
    if f_re.shape != f_ir.shape:
        raise DimensionError(
            f"f_re shape {f_re.shape} differs from f_ir shape {f_ir.shape}"
        )
    if est.kind != "M":
        raise ContractError(f"decomposition_loss needs an M estimator, got {est.kind}")
    if f_re.shape[0] < 2:
        raise BatchSizeError(f"batch must be >= 2, got {f_re.shape[0]}")
    a = ops.gradient_reversal(f_re)
    b = ops.gradient_reversal(f_ir)
    perm = derangement(f_re.shape[0], rng)
    t_joint = ops.gradient_reversal(est.scorer.score(a, b))
    t_marg = ops.gradient_reversal(est.scorer.score(a, ops.take_rows(b, perm)))
    return _js_from_scores(t_joint, t_marg)


def local_mi_loss(f_g: DiffTensor, f_re: DiffTensor, est: MIEstimator,
                  rng: np.random.Generator, *, train: bool = False) -> DiffTensor:
    """Patch-averaged JS objective between f_g and every local patch of f_re.

    Returns the objective (higher = more dependence); the training loop
    negates it so that minimizing the composite maximizes this MI surrogate.
    """
    if est.kind != "T_l":
        raise ContractError(f"local_mi_loss needs a T_l estimator, got {est.kind}")
    if f_re.ndim != 4 or f_g.ndim != 2 or f_re.shape[0] != f_g.shape[0]:
        raise DimensionError(
            f"need f_re [B,h1,w1,d1] and f_g [B,d_g], got {f_re.shape} and {f_g.shape}"
        )
    if f_re.shape[0] < 2:
        raise BatchSizeError(f"batch must be >= 2, got {f_re.shape[0]}")
    perm = derangement(f_re.shape[0], rng)
    s_joint = est.scorer.score_map(f_re, f_g)
    s_marg = est.scorer.score_map(f_re, f_g, row_order=perm)
    return _js_from_scores(s_joint, s_marg)


def global_mi_loss(f_g: DiffTensor, f_re: DiffTensor, est: MIEstimator,
                   rng: np.random.Generator, *, train: bool = False) -> DiffTensor:
    """JS objective between f_g and an independent embedding of all of f_re."""
    if est.kind != "T_g":
        raise ContractError(f"global_mi_loss needs a T_g estimator, got {est.kind}")
    if f_re.ndim != 4 or f_g.ndim != 2 or f_re.shape[0] != f_g.shape[0]:
        raise DimensionError(
            f"need f_re [B,h1,w1,d1] and f_g [B,d_g], got {f_re.shape} and {f_g.shape}"
        )
    if f_re.shape[0] < 2:
        raise BatchSizeError(f"batch must be >= 2, got {f_re.shape[0]}")
    perm = derangement(f_re.shape[0], rng)
    embedded = est.scorer.embed(f_re, train=train, rng=rng)
    s_joint = est.scorer.score(embedded, f_g)
    s_marg = est.scorer.score(embedded, ops.take_rows(f_g, perm))
    return _js_from_scores(s_joint, s_marg)
