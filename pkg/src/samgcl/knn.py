"""Exact and inverted-file (k-means quantized) nearest-neighbour search.

Both indexes rank by Euclidean distance and break ties by the smaller id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError


def _rank(points: np.ndarray, ids: np.ndarray, q: np.ndarray, m: int, exclude: Optional[int]):
    d = np.sqrt(((points - q) ** 2).sum(axis=1))
    if exclude is not None:
        keep = ids != exclude
        d, ids = d[keep], ids[keep]
    order = np.lexsort((ids, d))[:m]
    return ids[order], d[order]


def _check_m(m: int, available: int):
    if m < 0:
        raise ConfigError("m must be non-negative")
    if m > available:
        raise ConfigError(f"asked for {m} neighbours but only {available} candidates are indexed")


@dataclass(frozen=True, eq=False)
class ExactIndex:
    points: np.ndarray
    ids: np.ndarray

    def __len__(self):
        return len(self.ids)

    def query(self, q, m: int, exclude: Optional[int] = None):
        """Ids (and distances) of the ``m`` nearest points, nearest first."""
        _check_m(m, len(self) - int(exclude is not None and bool(np.any(self.ids == exclude))))
        return _rank(self.points, self.ids, np.asarray(q, dtype=np.float64).ravel(), m, exclude)


def build_exact(points, ids=None) -> ExactIndex:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(points) < 1:
        raise ConfigError("an index needs at least one point")
    ids = np.arange(len(points)) if ids is None else np.asarray(ids, dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise ConfigError("ids must be unique")
    return ExactIndex(points, ids)


def kmeans(points: np.ndarray, C: int, iters: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-iteration Lloyd k-means; an empty cluster is re-seeded at the point farthest from its centroid."""
    centroids = points[np.sort(rng.choice(len(points), size=C, replace=False))].copy()
    for _ in range(iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for c in range(C):
            members = assign == c
            if members.any():
                centroids[c] = points[members].mean(axis=0)
            else:
                far = int(d2[np.arange(len(points)), assign].argmax())
                centroids[c] = points[far]
                assign[far] = c
                d2[far, :] = 0.0
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return centroids, d2.argmin(axis=1)


@dataclass(frozen=True, eq=False)
class QuantizedIndex:
    points: np.ndarray
    ids: np.ndarray
    centroids: np.ndarray
    lists: tuple  # per-centroid arrays of row positions into points/ids
    probe: int

    def __len__(self):
        return len(self.ids)

    @property
    def num_lists(self) -> int:
        return len(self.centroids)

    def list_ids(self) -> list[np.ndarray]:
        return [self.ids[rows] for rows in self.lists]

    def query(self, q, m: int, exclude: Optional[int] = None, probe: Optional[int] = None):
        """Scan the ``probe`` lists with the closest centroids and rank their members exactly.

        If those lists hold fewer than ``m`` candidates, further lists are
        scanned in centroid order until enough are found.
        """
        has_excl = exclude is not None and bool(np.any(self.ids == exclude))
        _check_m(m, len(self) - int(has_excl))
        probe = self.probe if probe is None else probe
        if not 1 <= probe <= self.num_lists:
            raise ConfigError(f"probe must lie in [1, {self.num_lists}]")
        q = np.asarray(q, dtype=np.float64).ravel()
        dc = ((self.centroids - q) ** 2).sum(axis=1)
        order = np.lexsort((np.arange(self.num_lists), dc))
        rows, scanned, count = [], 0, 0
        for c in order:
            if scanned >= probe and count >= m:
                break
            r = self.lists[c]
            if has_excl:
                r = r[self.ids[r] != exclude]
            rows.append(r)
            count += len(r)
            scanned += 1
        rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        return _rank(self.points[rows], self.ids[rows], q, m, None)


def build_quantized(points, C: int, kmeans_iters: int = 20, seed: int = 0, probe: int = 4, ids=None) -> QuantizedIndex:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(points) < 1:
        raise ConfigError("an index needs at least one point")
    if not 1 <= C <= len(points):
        raise ConfigError(f"C={C} must lie in [1, {len(points)}]")
    ids = np.arange(len(points)) if ids is None else np.asarray(ids, dtype=np.int64)
    if len(np.unique(ids)) != len(ids):
        raise ConfigError("ids must be unique")
    centroids, assign = kmeans(points, C, kmeans_iters, np.random.default_rng(seed))
    lists = tuple(np.flatnonzero(assign == c) for c in range(C))
    return QuantizedIndex(points, ids, centroids, lists, min(max(probe, 1), C))


def default_num_lists(n: int) -> int:
    return max(1, int(round(np.sqrt(n))))


def build_index(points, kind: str = "auto", seed: int = 0, probe: int = 4, auto_threshold: int = 2000):
    """Exact index for small collections, quantized above ``auto_threshold`` points when ``kind='auto'``."""
    n = len(points)
    if kind == "exact" or (kind == "auto" and n < auto_threshold):
        return build_exact(points)
    if kind in ("quantized", "auto"):
        return build_quantized(points, default_num_lists(n), seed=seed, probe=probe)
    raise ConfigError(f"unknown index kind {kind!r}")
