"""Frozen-representation evaluation: stratified k-fold logistic-regression probe."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigError


@dataclass(frozen=True)
class ProbeConfig:
    folds: int = 10
    l2: float = 1e-3
    epochs: int = 200
    lr: float = 0.05
    repetitions: int = 1

    def validate(self):
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.repetitions < 1 or self.epochs < 1:
            raise ConfigError("repetitions and epochs must be >= 1")


def accuracy(predictions, labels) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if labels.size == 0:
        raise ValueError("accuracy of an empty set")
    return float(np.mean(predictions == labels))


def stratified_folds(labels, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Disjoint cover of ``range(len(labels))``; each class is dealt round-robin over the folds."""
    labels = np.asarray(labels)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    cursor = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        for idx in members.tolist():
            buckets[cursor % folds].append(idx)
            cursor += 1
    return [np.sort(np.array(b, dtype=np.int64)) for b in buckets]


def fit_logistic(X: np.ndarray, y: np.ndarray, num_classes: int, cfg: ProbeConfig, rng: np.random.Generator):
    """Multinomial logistic regression trained full-batch with Adam; returns ``(W, b)`` arrays."""
    d = X.shape[1]
    W = T.Tensor(rng.normal(0.0, 0.01, size=(d, num_classes)), requires_grad=True)
    b = T.Tensor(np.zeros((1, num_classes)), requires_grad=True)
    onehot = np.eye(num_classes)[y]
    state = T.AdamState.for_params([W, b])
    Xt = T.Tensor(X)
    for _ in range(cfg.epochs):
        logits = T.add(T.matmul(Xt, W), b)
        nll = T.mean(T.sub(T.logsumexp_rows(logits), T.sum(T.elementwise_mul(logits, onehot), axis=1)))
        loss = T.add(nll, T.scalar_mul(T.sum(T.elementwise_mul(W, W)), cfg.l2))
        loss.backward()
        T.adam_step([W, b], [W.grad, b.grad], state, lr=cfg.lr)
        W.zero_grad()
        b.zero_grad()
    return W.data, b.data


def linear_probe(embeddings, labels, cfg: ProbeConfig = ProbeConfig(), seed: int = 0) -> tuple[float, float]:
    """Mean and standard deviation of held-out accuracy across folds x repetitions."""
    cfg.validate()
    X = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    classes, y = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise ConfigError("linear probe needs at least two classes")
    if len(X) < cfg.folds:
        raise ConfigError(f"{len(X)} samples cannot fill {cfg.folds} folds")
    scores = []
    for rep in range(cfg.repetitions):
        rng = np.random.default_rng([seed, 3, rep])
        parts = stratified_folds(y, cfg.folds, rng)
        for k, test in enumerate(parts):
            if len(test) == 0:
                continue
            train = np.concatenate([p for j, p in enumerate(parts) if j != k])
            mu = X[train].mean(axis=0)
            sd = X[train].std(axis=0)
            sd = np.where(sd > 1e-12, sd, 1.0)
            W, b = fit_logistic((X[train] - mu) / sd, y[train], len(classes), cfg, rng)
            pred = ((X[test] - mu) / sd @ W + b).argmax(axis=1)
            scores.append(accuracy(pred, y[test]))
    return float(np.mean(scores)), float(np.std(scores))


def default_probe(task: str, folds: Optional[int] = None) -> ProbeConfig:
    return ProbeConfig(folds=folds or (5 if task == "node-level" else 10))
