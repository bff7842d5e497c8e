"""Smoothed activation maps: unsupervised node/edge importance from embeddings.

Channel weights for a graph (or node) are the L2-normalised sum of its own
pooled embedding and those of its ``m`` nearest neighbours in embedding
space.  Node scores are ``relu(Z @ w)``; an edge scores the mean of its two
end nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, DegenerateExplanation
from .knn import build_index

_TINY = 1e-12


@dataclass(frozen=True)
class SmoothingConfig:
    m: int = 5
    scope: str = "graph-level"
    include_self: bool = True

    def validate(self):
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if self.scope not in ("graph-level", "node-level"):
            raise ConfigError(f"unknown scope {self.scope!r}")
        if self.m == 0 and not self.include_self:
            raise ConfigError("m = 0 without the self term leaves nothing to smooth")


@dataclass(frozen=True, eq=False)
class Explanation:
    psi: np.ndarray
    psi01: np.ndarray
    phi: np.ndarray
    w_tilde: np.ndarray

    def edge_probs(self, edges: np.ndarray) -> np.ndarray:
        """Bernoulli keep probabilities per edge, from the [0, 1]-rescaled node scores."""
        return edge_scores(self.psi01, edges)


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if not np.isfinite(norm) or norm < _TINY:
        raise DegenerateExplanation("channel weights vanish before normalisation")
    return v / norm


def _smoothed(target: int, embeddings: np.ndarray, index, m: int, include_self: bool) -> np.ndarray:
    if m >= len(embeddings):
        raise ConfigError(f"m={m} neighbours requested from {len(embeddings)} items")
    total = embeddings[target].copy() if include_self else np.zeros(embeddings.shape[1])
    if m > 0:
        if index is None:
            index = build_index(embeddings, "exact")
        nbrs, _ = index.query(embeddings[target], m, exclude=target)
        total = total + embeddings[nbrs].sum(axis=0)
    return _unit(total)


def channel_importance_graph(n: int, pooled_embeddings, index=None, m: int = 5, include_self: bool = True) -> np.ndarray:
    """Unit channel weights for graph ``n`` from its pooled embedding and its ``m`` nearest graphs."""
    return _smoothed(n, np.asarray(pooled_embeddings, dtype=np.float64), index, m, include_self)


def channel_importance_node(i: int, Z, index=None, m: int = 5, include_self: bool = True) -> np.ndarray:
    """Unit channel weights for node ``i`` from its embedding and its ``m`` nearest nodes."""
    return _smoothed(i, np.asarray(Z, dtype=np.float64), index, m, include_self)


def node_scores(Z, w_tilde) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    return np.maximum(Z @ np.asarray(w_tilde, dtype=np.float64).ravel(), 0.0)


def cam_scores(Z, class_weights) -> np.ndarray:
    """Supervised class-activation scores; same arithmetic as :func:`node_scores` with class weights."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    return np.maximum(Z @ np.asarray(class_weights, dtype=np.float64).ravel(), 0.0)


def edge_scores(psi, edges) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return (psi[edges[:, 0]] + psi[edges[:, 1]]) / 2.0


def normalize01(psi) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant vector maps to 0.5 everywhere."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.size == 0:
        return psi.copy()
    lo, hi = psi.min(), psi.max()
    if hi - lo <= 0:
        return np.full_like(psi, 0.5)
    return (psi - lo) / (hi - lo)


def sparsity(psi, mu: float) -> float:
    """Share of nodes whose score does not exceed the dataset-level mean ``mu``."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.size == 0:
        return 1.0
    return 1.0 - float(np.count_nonzero(psi > mu)) / psi.size


def dataset_sparsity(psis: Sequence[np.ndarray]) -> np.ndarray:
    """Per-graph sparsity with ``mu`` taken over every node of every graph."""
    mu = float(np.concatenate([np.ravel(p) for p in psis]).mean())
    return np.array([sparsity(p, mu) for p in psis])


# --------------------------------------------------------------------------
# whole-graph / whole-dataset helpers


def _finish(psi: np.ndarray, edges: np.ndarray, w: np.ndarray) -> Explanation:
    return Explanation(psi, normalize01(psi), edge_scores(psi, edges), w)


def explain_graphs(Zs: Sequence[np.ndarray], pooled: np.ndarray, edges: Sequence[np.ndarray], cfg: SmoothingConfig, index=None) -> list[Optional[Explanation]]:
    """Explanations for every graph of a dataset; ``None`` marks a degenerate heat-map.

    ``index`` may be prebuilt over ``pooled``; otherwise an exact index is used.
    """
    cfg.validate()
    pooled = np.asarray(pooled, dtype=np.float64)
    if cfg.m > 0 and index is None:
        index = build_index(pooled, "exact")
    out = []
    for n, Z in enumerate(Zs):
        try:
            w = channel_importance_graph(n, pooled, index, cfg.m, cfg.include_self)
        except DegenerateExplanation:
            out.append(None)
            continue
        psi = node_scores(Z, w)
        out.append(None if not psi.any() else _finish(psi, edges[n], w))
    return out


def explain_nodes(Z: np.ndarray, edges: np.ndarray, cfg: SmoothingConfig, index=None) -> Explanation:
    """Node-level explanation: each node is scored against its own smoothed channel weights.

    ``w_tilde`` holds one row per node.  Nodes whose weights vanish score 0.
    Raises :class:`DegenerateExplanation` when every score is zero.
    """
    cfg.validate()
    Z = np.asarray(Z, dtype=np.float64)
    if cfg.m > 0 and index is None:
        index = build_index(Z)
    W = np.zeros_like(Z)
    for i in range(len(Z)):
        try:
            W[i] = channel_importance_node(i, Z, index, cfg.m, cfg.include_self)
        except DegenerateExplanation:
            pass
    psi = np.maximum((Z * W).sum(axis=1), 0.0)
    if not psi.any():
        raise DegenerateExplanation("all node scores are zero")
    return _finish(psi, edges, W)


def roc_auc(scores, positive) -> float:
    """Mann-Whitney ROC-AUC with tied scores counted as one half."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos, n_neg = int(positive.sum()), int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both positive and negative items")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
