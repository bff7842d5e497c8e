"""GCN / GIN encoders with mean pooling, MLP heads and parameter checkpoints."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from . import tensor as T
from .errors import ConfigError, ShapeError
from .graph import Graph, normalized_adjacency
from .tensor import Tensor


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "GIN"
    layers: int = 3
    hidden_dim: int = 64
    gin_epsilon: float = 0.0
    learn_epsilon: bool = False

    def validate(self):
        if self.kind not in ("GCN", "GIN"):
            raise ConfigError(f"unknown encoder kind {self.kind!r}")
        if self.layers < 1 or self.hidden_dim < 1:
            raise ConfigError("encoder needs layers >= 1 and hidden_dim >= 1")


@dataclass(frozen=True)
class HeadConfig:
    projector: tuple = (64, 64)
    predictor: tuple = (32, 64)


Params = dict  # name -> Tensor, insertion ordered


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float64) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype), requires_grad=True)


def _bias(dim: int, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros((1, dim), dtype=dtype), requires_grad=True)


def init_encoder(cfg: EncoderConfig, in_dim: int, rng: np.random.Generator, dtype=np.float64) -> Params:
    cfg.validate()
    params: Params = {}
    d = in_dim
    for layer in range(cfg.layers):
        k = cfg.hidden_dim
        if cfg.kind == "GCN":
            params[f"gcn{layer}.W"] = glorot(rng, d, k, dtype)
        else:
            params.update(init_mlp((k, k), d, rng, f"gin{layer}.mlp", dtype))
            if cfg.learn_epsilon:
                params[f"gin{layer}.eps"] = Tensor(np.full((1, 1), cfg.gin_epsilon, dtype=dtype), requires_grad=True)
        d = k
    return params


def init_mlp(sizes: Sequence[int], in_dim: int, rng: np.random.Generator, prefix: str, dtype=np.float64) -> Params:
    if not sizes:
        raise ConfigError(f"{prefix}: MLP needs at least one layer")
    params: Params = {}
    d = in_dim
    for k, out in enumerate(sizes):
        params[f"{prefix}{k}.W"] = glorot(rng, d, out, dtype)
        params[f"{prefix}{k}.b"] = _bias(out, dtype)
        d = out
    return params


def mlp_forward(x, params: Params, prefix: str) -> Tensor:
    """Linear layers with ReLU in between; the last layer is linear."""
    count = len([k for k in params if k.startswith(prefix) and k.endswith(".W")])
    h = T.as_tensor(x)
    for k in range(count):
        h = T.add(T.matmul(h, params[f"{prefix}{k}.W"]), params[f"{prefix}{k}.b"])
        if k < count - 1:
            h = T.relu(h)
    return h


def head_forward(z, params: Params, which: str = "p_o") -> Tensor:
    """Projector ``p_o`` or predictor ``p_e``."""
    if which not in ("p_o", "p_e"):
        raise ConfigError(f"unknown head {which!r}")
    first = params.get(f"{which}0.W")
    if first is None:
        raise ConfigError(f"head {which} is not initialised")
    z = T.as_tensor(z)
    if z.shape[1] != first.shape[0]:
        raise ShapeError("head input width differs from first layer", z.shape, first.shape)
    return mlp_forward(z, params, which)


# --------------------------------------------------------------------------
# layers


def gcn_forward(F_prev, A_hat, W, activate: bool = True) -> Tensor:
    """One GCN layer ``relu(A_hat @ F_prev @ W)``; ``activate=False`` leaves it linear."""
    F_prev, W = T.as_tensor(F_prev), T.as_tensor(W)
    A_hat = np.asarray(A_hat)
    if A_hat.shape != (F_prev.shape[0], F_prev.shape[0]):
        raise ShapeError("gcn_forward: adjacency does not match node count", A_hat.shape, F_prev.shape)
    out = T.matmul(A_hat, T.matmul(F_prev, W))
    return T.relu(out) if activate else out


def neighbor_sum_matrix(neighbors: Sequence[Sequence[int]]) -> np.ndarray:
    n = len(neighbors)
    a = np.zeros((n, n))
    for i, nb in enumerate(neighbors):
        for j in nb:
            a[i, j] += 1.0
    return a


def gin_forward(F_prev, adjacency, eps, mlp) -> Tensor:
    """GIN update ``mlp((1 + eps) * F_i + sum_{j in N(i)} F_j)``.

    ``adjacency`` is a dense 0/1 matrix without self-loops or a list of
    neighbour lists.  ``eps`` is a float or a ``1x1`` tensor; ``mlp`` is a
    callable on tensors.
    """
    F_prev = T.as_tensor(F_prev)
    if not isinstance(adjacency, np.ndarray):
        adjacency = neighbor_sum_matrix(adjacency)
    n = F_prev.shape[0]
    if adjacency.shape != (n, n):
        raise ShapeError("gin_forward: adjacency does not match node count", adjacency.shape, F_prev.shape)
    agg = T.matmul(adjacency, F_prev)
    if isinstance(eps, Tensor):
        own = T.add(F_prev, T.elementwise_mul(F_prev, eps))
    else:
        own = F_prev if eps == 0 else T.scalar_mul(F_prev, 1.0 + eps)
    return mlp(T.add(own, agg))


# --------------------------------------------------------------------------
# encoders


@dataclass
class GraphBatch:
    """Several graphs as one block-diagonal graph plus a mean-pooling matrix."""

    features: np.ndarray
    adjacency: np.ndarray  # raw 0/1, used by GIN
    norm_adjacency: np.ndarray  # D^-1/2 (A+I) D^-1/2, used by GCN
    pool: np.ndarray  # (B, n_total) with 1/n_g entries
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph], kind: str = "GIN", dtype="float64") -> "GraphBatch":
        sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        feats = np.concatenate([g.features for g in graphs], axis=0)
        if kind == "GIN":
            adj = block_diag(*[g.adjacency() for g in graphs])
            norm = None
        else:
            adj = None
            norm = block_diag(*[normalized_adjacency(g) for g in graphs])
        pool = np.zeros((len(graphs), offsets[-1]))
        for b, (lo, hi) in enumerate(zip(offsets[:-1], offsets[1:])):
            pool[b, lo:hi] = 1.0 / max(hi - lo, 1)
        cast = lambda a: None if a is None else a.astype(dtype, copy=False)  # noqa: E731
        return cls(cast(feats), cast(adj), cast(norm), cast(pool), offsets)

    def split(self, Z: np.ndarray) -> list[np.ndarray]:
        return [Z[lo:hi] for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]


def _node_embeddings(features, adjacency, norm_adjacency, cfg: EncoderConfig, params: Params) -> Tensor:
    h = T.as_tensor(features)
    for layer in range(cfg.layers):
        last = layer == cfg.layers - 1
        if cfg.kind == "GCN":
            h = gcn_forward(h, norm_adjacency, params[f"gcn{layer}.W"], activate=not last)
        else:
            eps = params.get(f"gin{layer}.eps", cfg.gin_epsilon)
            h = gin_forward(h, adjacency, eps, lambda x, l=layer: mlp_forward(x, params, f"gin{l}.mlp"))
            if not last:
                h = T.relu(h)
    return h


def encode(g: Graph, cfg: EncoderConfig, params: Params) -> tuple[Tensor, Tensor]:
    """Node embeddings ``Z = F^L`` and the mean-pooled graph embedding ``z``."""
    if cfg.kind == "GCN":
        Z = _node_embeddings(g.features, None, normalized_adjacency(g), cfg, params)
    else:
        Z = _node_embeddings(g.features, g.adjacency(), None, cfg, params)
    return Z, T.mean_rows(Z)


def encode_batch(batch: GraphBatch, cfg: EncoderConfig, params: Params) -> tuple[Tensor, Tensor]:
    """Like :func:`encode` for a block-diagonal batch; ``z`` has one row per graph."""
    Z = _node_embeddings(batch.features, batch.adjacency, batch.norm_adjacency, cfg, params)
    return Z, T.matmul(batch.pool, Z)


def encode_all(graphs: Sequence[Graph], cfg: EncoderConfig, params: Params, chunk: int = 64) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradient-free encoding of many graphs: per-graph ``Z`` arrays and stacked pooled ``z``."""
    frozen = {k: T.Tensor(v.data) for k, v in params.items()}
    Zs, zs = [], []
    for lo in range(0, len(graphs), chunk):
        batch = GraphBatch.from_graphs(graphs[lo : lo + chunk], cfg.kind)
        Z, z = encode_batch(batch, cfg, frozen)
        Zs.extend(batch.split(Z.data))
        zs.append(z.data)
    return Zs, np.concatenate(zs, axis=0)


# --------------------------------------------------------------------------
# checkpoints: "name\trows\tcols\n" per array, blank line, then little-endian float64 data


def save_params(params: Params, path) -> Path:
    path = Path(path)
    header = "".join(f"{name}\t{t.shape[0]}\t{t.shape[1]}\n" for name, t in params.items()) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        for t in params.values():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return path


def load_params(path, requires_grad: bool = True) -> Params:
    raw = Path(path).read_bytes()
    end = 1 if raw.startswith(b"\n") else raw.index(b"\n\n") + 2
    entries = []
    for line in filter(None, raw[: end - 1].decode("utf-8").split("\n")):
        name, rows, cols = line.split("\t")
        entries.append((name, int(rows), int(cols)))
    params: Params = {}
    pos = end
    for name, rows, cols in entries:
        nbytes = rows * cols * 8
        arr = np.frombuffer(raw[pos : pos + nbytes], dtype="<f8").reshape(rows, cols).astype(np.float64)
        params[name] = Tensor(arr, requires_grad=requires_grad)
        pos += nbytes
    if pos != len(raw):
        raise ValueError(f"checkpoint has {len(raw) - pos} trailing bytes")
    return params
