"""Two-view augmentation: explanation-guided edge/feature masks and the random baseline.

Guided masks keep everything scoring above a threshold in both views and
split the remainder between the views: view 1 keeps an element with
probability equal to its rescaled score, view 2 keeps exactly what view 1
dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, ShapeError
from .graph import Graph
from .sam import Explanation

MODES = ("random", "heatmap", "engage")


@dataclass(frozen=True)
class AugmentConfig:
    mode: str = "engage"
    lambda_e: float = 0.0
    lambda_f: float = 0.0
    stats_scope: str = "per-batch"
    p_edge: float = 0.8
    p_feat: float = 0.8
    random_keep: str = "fixed"  # or "matched"

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown augmentation mode {self.mode!r}; expected one of {MODES}")
        if self.stats_scope not in ("per-graph", "per-batch"):
            raise ConfigError(f"unknown stats_scope {self.stats_scope!r}")
        if self.random_keep not in ("fixed", "matched"):
            raise ConfigError(f"unknown random_keep {self.random_keep!r}")
        for name in ("p_edge", "p_feat"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")

    def random_keep_rates(self) -> tuple[float, float]:
        if self.random_keep == "fixed":
            return self.p_edge, self.p_feat
        return matched_keep_rate(self.lambda_e), matched_keep_rate(self.lambda_f)


def matched_keep_rate(lam: float) -> float:
    """Per-view keep rate of guided masks if scores were Gaussian.

    A share ``1 - Phi(lam)`` sits above ``mu + lam * sigma`` and is kept in
    both views; the rest is split evenly, so each view keeps half of it.
    """
    below = float(norm.cdf(lam))
    return 1.0 - 0.5 * below


@dataclass(frozen=True, eq=False)
class MaskPair:
    edge_mask_1: np.ndarray
    edge_mask_2: np.ndarray
    feat_mask_1: np.ndarray
    feat_mask_2: np.ndarray


def _threshold(values, lam: float) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return np.inf
    return float(values.mean() + lam * values.std())


def edge_threshold(phi, lambda_e: float) -> float:
    """``mean + lambda_e * std`` (population std); ``+inf`` for an empty edge set."""
    return _threshold(phi, lambda_e)


def feature_threshold(psi, lambda_f: float) -> float:
    return _threshold(psi, lambda_f)


def _guided(scores, probs, theta: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if scores.shape != probs.shape:
        raise ShapeError("scores and keep probabilities differ in shape", scores.shape, probs.shape)
    protected = scores > theta
    # one uniform per element regardless of theta, so the stream does not depend on lambda
    draw = rng.random(scores.shape) < probs
    return protected | draw, protected | ~draw


def make_edge_masks(phi, probs, theta_e: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Edge masks for the two views; ``phi`` decides protection, ``probs`` the view-1 draw."""
    return _guided(phi, probs, theta_e, rng)


def make_feature_masks(psi, psi01, theta_f: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-node feature masks (one draw per node, broadcast over feature columns)."""
    return _guided(psi, psi01, theta_f, rng)


def guided_masks(g: Graph, expl: Explanation, theta_e: float, theta_f: float, rng: np.random.Generator) -> MaskPair:
    e1, e2 = make_edge_masks(expl.phi, expl.edge_probs(g.edges), theta_e, rng)
    f1, f2 = make_feature_masks(expl.psi, expl.psi01, theta_f, rng)
    return MaskPair(e1, e2, f1, f2)


def random_masks(g: Graph, p_edge: float, p_feat: float, rng: np.random.Generator) -> MaskPair:
    """Independent Bernoulli keeps per undirected edge and per node, drawn separately per view."""
    e1 = rng.random(g.num_edges) < p_edge
    e2 = rng.random(g.num_edges) < p_edge
    f1 = rng.random(g.num_nodes) < p_feat
    f2 = rng.random(g.num_nodes) < p_feat
    return MaskPair(e1, e2, f1, f2)


def apply_view(g: Graph, edge_mask, feat_mask) -> Graph:
    edge_mask = np.asarray(edge_mask, dtype=bool)
    feat_mask = np.asarray(feat_mask, dtype=bool)
    if edge_mask.shape != (g.num_edges,):
        raise ShapeError("edge mask arity differs from edge count", edge_mask.shape, (g.num_edges,))
    if feat_mask.shape != (g.num_nodes,):
        raise ShapeError("feature mask arity differs from node count", feat_mask.shape, (g.num_nodes,))
    return Graph(g.num_nodes, g.edges[edge_mask], g.features * feat_mask[:, None], g.label)


def apply(g: Graph, masks: MaskPair) -> tuple[Graph, Graph]:
    return (
        apply_view(g, masks.edge_mask_1, masks.feat_mask_1),
        apply_view(g, masks.edge_mask_2, masks.feat_mask_2),
    )


def substream(run_seed: int, graph_id: int, epoch: int, stream: int = 2) -> np.random.Generator:
    """Deterministic per-(graph, epoch) generator, independent of scheduling order."""
    return np.random.default_rng([run_seed, stream, graph_id, epoch])


def batch_thresholds(explanations, lambda_e: float, lambda_f: float) -> tuple[float, float]:
    """Thresholds over the pooled scores of several explanations (``None`` entries skipped)."""
    live = [e for e in explanations if e is not None]
    if not live:
        return np.inf, np.inf
    phi = np.concatenate([e.phi for e in live])
    psi = np.concatenate([e.psi for e in live])
    return edge_threshold(phi, lambda_e), feature_threshold(psi, lambda_f)


def make_masks(g: Graph, expl: Optional[Explanation], cfg: AugmentConfig, thresholds, rng: np.random.Generator) -> MaskPair:
    """Dispatch on mode; a missing (degenerate) explanation falls back to random masks."""
    if cfg.mode == "random" or expl is None:
        p_e, p_f = cfg.random_keep_rates()
        return random_masks(g, p_e, p_f, rng)
    if thresholds is None:
        thresholds = (edge_threshold(expl.phi, cfg.lambda_e), feature_threshold(expl.psi, cfg.lambda_f))
    return guided_masks(g, expl, thresholds[0], thresholds[1], rng)
