"""Contrastive objectives and the explanation-refresh training loops.

Each epoch starts by encoding the whole dataset with a frozen snapshot of
the encoder, explaining every graph (or node) from that snapshot, and then
running one optimisation pass over mini-batches of augmented view pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import tensor as T
from .augment import AugmentConfig, apply, batch_thresholds, make_masks, substream
from .errors import ConfigError, DegenerateExplanation, NumericalError
from .gnn import (
    EncoderConfig,
    GraphBatch,
    HeadConfig,
    encode,
    encode_all,
    encode_batch,
    head_forward,
    init_encoder,
    init_mlp,
)
from .graph import Dataset
from .knn import build_index
from .sam import SmoothingConfig, dataset_sparsity, explain_graphs, explain_nodes, sparsity
from .tensor import Tensor

log = logging.getLogger(__name__)

FRAMEWORKS = ("simclr", "simsiam")
_MIN_NORM = 1e-12


def _check_rows(t: Tensor, what: str):
    norms = np.sqrt((t.data * t.data).sum(axis=1))
    if not np.all(norms > _MIN_NORM):
        raise NumericalError(f"{what}: zero-norm row")


def nt_xent(Z1, Z2, tau: float = 0.5) -> Tensor:
    """Normalised-temperature cross entropy over ``2B`` anchors.

    Each row's positive is the same index in the other view; the other
    ``2B - 2`` rows are negatives, and the positive stays in the denominator.
    """
    Z1, Z2 = T.as_tensor(Z1), T.as_tensor(Z2)
    B = Z1.shape[0]
    if B < 2:
        raise ConfigError("nt_xent needs a batch of at least 2")
    if tau <= 0:
        raise ConfigError("temperature must be positive")
    _check_rows(Z1, "nt_xent")
    _check_rows(Z2, "nt_xent")
    Zn = T.row_l2_normalize(T.concat_rows([Z1, Z2]))
    S = T.scalar_mul(T.matmul(Zn, T.transpose(Zn)), 1.0 / tau)
    n = 2 * B
    pos_mask = np.zeros((n, n))
    pos_mask[np.arange(n), (np.arange(n) + B) % n] = 1.0
    self_mask = np.where(np.eye(n, dtype=bool), -np.inf, 0.0)
    positives = T.sum(T.elementwise_mul(S, pos_mask), axis=1)
    denominators = T.logsumexp_rows(T.add(S, self_mask))
    return T.mean(T.sub(denominators, positives))


def negative_cosine(p, target) -> Tensor:
    """``-mean_i cos(p_i, target_i)``."""
    p, target = T.as_tensor(p), T.as_tensor(target)
    _check_rows(p, "negative_cosine")
    _check_rows(target, "negative_cosine")
    prod = T.elementwise_mul(T.row_l2_normalize(p), T.row_l2_normalize(target))
    return T.scalar_mul(T.mean(T.sum(prod, axis=1)), -1.0)


def simsiam_loss(z1, z2, heads: dict, stop_gradient: bool = True) -> Tensor:
    """Symmetrised predictor-vs-target negative cosine.

    ``heads`` must hold the projector ``p_o`` and predictor ``p_e``
    parameters.  ``stop_gradient=False`` exists only for the collapse probe.
    """
    sg = T.stop_gradient if stop_gradient else (lambda t: t)
    h1, h2 = head_forward(z1, heads, "p_o"), head_forward(z2, heads, "p_o")
    p1, p2 = head_forward(h1, heads, "p_e"), head_forward(h2, heads, "p_e")
    return T.scalar_mul(T.add(negative_cosine(p1, sg(h2)), negative_cosine(p2, sg(h1))), 0.5)


# --------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class TrainConfig:
    framework: str = "simclr"
    tau: float = 0.5
    m: int = 5
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    epochs: int = 50
    batch_size: int = 32
    lr: Optional[float] = None
    optimizer: str = "adam"
    warmup_epochs: int = 1
    seed: int = 0
    encoder: Optional[EncoderConfig] = None
    heads: Optional[HeadConfig] = None
    stop_gradient: bool = True
    index_kind: str = "auto"
    dtype: str = "float64"

    def validate(self):
        if self.framework not in FRAMEWORKS:
            raise ConfigError(f"unknown framework {self.framework!r}; expected one of {FRAMEWORKS}")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.warmup_epochs < 1:
            raise ConfigError("warmup_epochs must be >= 1")
        if self.epochs < 1 or self.batch_size < 2:
            raise ConfigError("need epochs >= 1 and batch_size >= 2")
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"unknown dtype {self.dtype!r}")
        self.augment.validate()

    def smoothing(self, scope: str) -> SmoothingConfig:
        # heat-map guidance is the unsmoothed variant
        m = 0 if self.augment.mode == "heatmap" else self.m
        return SmoothingConfig(m=m, scope=scope, include_self=True)


@dataclass
class RunRecord:
    losses: list
    sparsity: list
    embeddings: np.ndarray
    explanations: list
    params: dict
    metrics: dict = field(default_factory=dict)


def default_encoder(task: str) -> EncoderConfig:
    if task == "node-level":
        return EncoderConfig(kind="GCN", layers=2, hidden_dim=128)
    return EncoderConfig(kind="GIN", layers=3, hidden_dim=64)


def default_heads(k: int) -> HeadConfig:
    return HeadConfig(projector=(k, k), predictor=(max(k // 2, 1), k))


def _init_model(cfg: TrainConfig, enc: EncoderConfig, in_dim: int):
    dtype = np.dtype(cfg.dtype)
    rng = np.random.default_rng([cfg.seed, 0])
    heads_cfg = cfg.heads or default_heads(enc.hidden_dim)
    enc_params = init_encoder(enc, in_dim, rng, dtype)
    head_params = init_mlp(heads_cfg.projector, enc.hidden_dim, rng, "p_o", dtype)
    if cfg.framework == "simsiam":
        head_params.update(init_mlp(heads_cfg.predictor, heads_cfg.projector[-1], rng, "p_e", dtype))
    return enc_params, head_params


def _pair_loss(z1: Tensor, z2: Tensor, heads: dict, cfg: TrainConfig) -> Tensor:
    if cfg.framework == "simclr":
        return nt_xent(head_forward(z1, heads, "p_o"), head_forward(z2, heads, "p_o"), cfg.tau)
    return simsiam_loss(z1, z2, heads, cfg.stop_gradient)


class _Optimizer:
    def __init__(self, params: list, cfg: TrainConfig, lr: float):
        self.params, self.cfg, self.lr = params, cfg, lr
        self.state = T.AdamState.for_params(params)

    def step(self):
        grads = [p.grad for p in self.params]
        if self.cfg.optimizer == "adam":
            T.adam_step(self.params, grads, self.state, lr=self.lr)
        else:
            T.sgd_step(self.params, grads, self.lr)
        for p in self.params:
            p.zero_grad()


def embedding_spread(embeddings) -> float:
    """Mean per-channel standard deviation of the L2-normalised rows (collapse diagnostic)."""
    e = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    e = e / np.where(norms > 0, norms, 1.0)
    return float(e.std(axis=0).mean())


# --------------------------------------------------------------------------
# graph-level


def explain_dataset(dataset: Dataset, enc: EncoderConfig, params: dict, smoothing: SmoothingConfig, index_kind: str = "auto", seed: int = 0):
    """Encode every graph with ``params`` (no gradients) and explain it.

    Returns ``(explanations, per-graph psi, pooled embeddings)``; a degenerate
    graph gets ``None`` and an all-zero psi.
    """
    graphs = dataset.graphs
    Zs, pooled = encode_all(graphs, enc, params)
    index = build_index(pooled, index_kind, seed=seed) if smoothing.m > 0 else None
    expls = explain_graphs(Zs, pooled, [g.edges for g in graphs], smoothing, index)
    psis = [e.psi if e is not None else np.zeros(g.num_nodes) for e, g in zip(expls, graphs)]
    return expls, psis, pooled


def train_graph_level(dataset: Dataset, encoder: Optional[EncoderConfig] = None, cfg: TrainConfig = TrainConfig()) -> RunRecord:
    cfg.validate()
    if dataset.task != "graph-level":
        raise ConfigError("train_graph_level needs a graph-level dataset")
    enc = encoder or cfg.encoder or default_encoder("graph-level")
    enc_params, head_params = _init_model(cfg, enc, dataset.feature_dim)
    params = list(enc_params.values()) + list(head_params.values())
    opt = _Optimizer(params, cfg, cfg.lr if cfg.lr is not None else 0.001)
    guided = cfg.augment.mode != "random"
    smoothing = cfg.smoothing("graph-level")
    graphs = dataset.graphs
    N = len(graphs)
    n_batches = max(1, int(np.ceil(N / cfg.batch_size)))
    if N < 2:
        raise ConfigError("graph-level training needs at least 2 graphs")

    losses, trace = [], []
    for epoch in range(cfg.epochs):
        expls = [None] * N
        if guided:
            expls, psis, _ = explain_dataset(dataset, enc, enc_params, smoothing, cfg.index_kind, cfg.seed)
            trace.append(float(dataset_sparsity(psis).mean()))
        else:
            trace.append(float("nan"))
        use_expl = guided and epoch >= cfg.warmup_epochs

        order = np.random.default_rng([cfg.seed, 1, epoch]).permutation(N)
        batch_losses = []
        for batch in np.array_split(order, n_batches):
            if use_expl and cfg.augment.stats_scope == "per-batch":
                thresholds = batch_thresholds([expls[i] for i in batch], cfg.augment.lambda_e, cfg.augment.lambda_f)
            else:
                thresholds = None
            views1, views2 = [], []
            for gid in batch.tolist():
                g = graphs[gid]
                expl = expls[gid] if use_expl else None
                aug = cfg.augment if use_expl else replace(cfg.augment, mode="random")
                g1, g2 = apply(g, make_masks(g, expl, aug, thresholds, substream(cfg.seed, gid, epoch)))
                views1.append(g1)
                views2.append(g2)
            _, z1 = encode_batch(GraphBatch.from_graphs(views1, enc.kind, cfg.dtype), enc, enc_params)
            _, z2 = encode_batch(GraphBatch.from_graphs(views2, enc.kind, cfg.dtype), enc, enc_params)
            try:
                loss = _pair_loss(z1, z2, head_params, cfg)
            except NumericalError as exc:
                log.warning("epoch %d: skipping batch (%s)", epoch, exc)
                continue
            loss.backward()
            opt.step()
            batch_losses.append(loss.item())
        losses.append(float(np.mean(batch_losses)) if batch_losses else float("nan"))
        log.debug("epoch %d loss %.5f sparsity %.4f", epoch, losses[-1], trace[-1])

    final_smoothing = smoothing if guided else SmoothingConfig(m=cfg.m, scope="graph-level")
    final_smoothing = replace(final_smoothing, m=min(final_smoothing.m, N - 1))
    expls, _, pooled = explain_dataset(dataset, enc, enc_params, final_smoothing, cfg.index_kind, cfg.seed)
    all_params = dict(enc_params, **head_params)
    return RunRecord(losses, trace, pooled, expls, all_params)


# --------------------------------------------------------------------------
# node-level


def train_node_level(dataset: Dataset, encoder: Optional[EncoderConfig] = None, cfg: TrainConfig = TrainConfig()) -> RunRecord:
    """Contrast each node with itself across two views of the single graph."""
    cfg.validate()
    if dataset.task != "node-level":
        raise ConfigError("train_node_level needs a node-level dataset")
    enc = encoder or cfg.encoder or default_encoder("node-level")
    g = dataset.graphs[0]
    if g.num_nodes < 2:
        raise ConfigError("node-level training needs at least 2 nodes")
    enc_params, head_params = _init_model(cfg, enc, dataset.feature_dim)
    params = list(enc_params.values()) + list(head_params.values())
    opt = _Optimizer(params, cfg, cfg.lr if cfg.lr is not None else 0.005)
    guided = cfg.augment.mode != "random"
    smoothing = cfg.smoothing("node-level")
    aug = replace(cfg.augment, stats_scope="per-graph")

    def snapshot():
        frozen = {k: Tensor(v.data) for k, v in enc_params.items()}
        return encode(g, enc, frozen)[0].data

    def explain(Z, sm):
        index = build_index(Z, cfg.index_kind, seed=cfg.seed) if sm.m > 0 else None
        try:
            return explain_nodes(Z, g.edges, sm, index)
        except DegenerateExplanation:
            return None

    losses, trace = [], []
    for epoch in range(cfg.epochs):
        expl = None
        if guided:
            expl = explain(snapshot(), smoothing)
            psi = expl.psi if expl is not None else np.zeros(g.num_nodes)
            trace.append(sparsity(psi, float(psi.mean())))
        else:
            trace.append(float("nan"))
        use_expl = guided and epoch >= cfg.warmup_epochs
        mode_cfg = aug if use_expl else replace(aug, mode="random")
        g1, g2 = apply(g, make_masks(g, expl if use_expl else None, mode_cfg, None, substream(cfg.seed, 0, epoch)))
        Z1, _ = encode(g1, enc, enc_params)
        Z2, _ = encode(g2, enc, enc_params)
        try:
            loss = _pair_loss(Z1, Z2, head_params, cfg)
        except NumericalError as exc:
            log.warning("epoch %d: skipping step (%s)", epoch, exc)
            losses.append(float("nan"))
            continue
        loss.backward()
        opt.step()
        losses.append(loss.item())

    Z = snapshot()
    final_smoothing = smoothing if guided else SmoothingConfig(m=min(cfg.m, g.num_nodes - 1), scope="node-level")
    return RunRecord(losses, trace, Z, [explain(Z, final_smoothing)], dict(enc_params, **head_params))
