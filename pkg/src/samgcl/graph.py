"""Graph containers, dataset readers/writers and the planted-motif generator.

Graphs are undirected and stored as a canonical edge array (``i < j``, sorted,
no duplicates, no self-loops).  Self-connections only appear inside
:func:`normalized_adjacency`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ParseError

DEFAULT_DEGREE_CAP = 50


def canonical_edges(pairs, num_nodes: Optional[int] = None) -> np.ndarray:
    """Return pairs as a sorted ``(E, 2)`` int array with ``i < j``, deduplicated.

    Self-loops are dropped.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if num_nodes is not None and arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
        raise ValueError(f"edge endpoint outside [0, {num_nodes})")
    arr = np.sort(arr, axis=1)
    arr = arr[arr[:, 0] != arr[:, 1]]
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(arr, axis=0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.num_nodes):
            raise ValueError(f"edge endpoint outside [0, {self.num_nodes})")
        # any orientation/order is accepted; self-loops and duplicates are not
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not stored in the edge list")
        canon = canonical_edges(edges)
        if len(canon) != len(edges):
            raise ValueError("duplicate undirected edge")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise ValueError(
                f"features must have shape ({self.num_nodes}, D), got {feats.shape}"
            )
        object.__setattr__(self, "edges", _frozen(canon))
        object.__setattr__(self, "features", _frozen(feats))
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency without self-loops."""
        a = np.zeros((self.num_nodes, self.num_nodes))
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(deg, self.edges.ravel(), 1)
        return deg

    def neighbor_lists(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for i, j in self.edges.tolist():
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(n) for n in nbrs]

    def with_features(self, features) -> "Graph":
        return Graph(self.num_nodes, self.edges, features, self.label)


@dataclass(frozen=True, eq=False)
class Dataset:
    graphs: tuple
    task: str
    name: str
    num_classes: int
    node_labels: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.task not in ("graph-level", "node-level"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "node-level" and len(self.graphs) != 1:
            raise ValueError("node-level datasets hold exactly one graph")
        dims = {g.feature_dim for g in self.graphs}
        if len(dims) > 1:
            raise ValueError(f"graphs disagree on feature dimension: {sorted(dims)}")
        if self.node_labels is not None:
            object.__setattr__(self, "node_labels", _frozen(np.asarray(self.node_labels, dtype=np.int64)))

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i) -> Graph:
        return self.graphs[i]

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].feature_dim

    def labels(self) -> np.ndarray:
        """Graph labels for graph-level data, node labels for node-level data."""
        if self.task == "node-level":
            return np.asarray(self.node_labels)
        return np.array([g.label for g in self.graphs], dtype=np.int64)


def normalized_adjacency(g: Graph) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` as a dense matrix."""
    a = g.adjacency() + np.eye(g.num_nodes)
    deg = a.sum(axis=1)
    return a / np.sqrt(np.outer(deg, deg))


def degree_one_hot(g: Graph, cap: int = DEFAULT_DEGREE_CAP) -> np.ndarray:
    """One-hot node degree with ``cap + 1`` columns; degrees above ``cap`` share the last one."""
    deg = np.minimum(g.degrees(), cap)
    x = np.zeros((g.num_nodes, cap + 1))
    x[np.arange(g.num_nodes), deg] = 1.0
    return x


# --------------------------------------------------------------------------
# TUDataset text format


def _read_lines(path: Path) -> list[str]:
    with open(path) as fh:
        return [ln.strip() for ln in fh]


def _read_int_column(path: Path) -> np.ndarray:
    out = []
    for lineno, ln in enumerate(_read_lines(path), start=1):
        if not ln:
            continue
        try:
            out.append(int(ln.split(",")[0]))
        except ValueError:
            raise ParseError(f"expected an integer, got {ln!r}", path, lineno) from None
    return np.array(out, dtype=np.int64)


def parse_tudataset(root, name: str, degree_cap: int = DEFAULT_DEGREE_CAP) -> Dataset:
    """Read ``{name}_A.txt``, ``{name}_graph_indicator.txt`` and the optional label/attribute files."""
    root = Path(root)
    base = root / name if (root / name / f"{name}_A.txt").exists() else root
    path = lambda suffix: base / f"{name}_{suffix}.txt"  # noqa: E731

    for required in ("A", "graph_indicator"):
        if not path(required).exists():
            raise ParseError("missing mandatory file", path(required))

    indicator = _read_int_column(path("graph_indicator"))
    num_total = len(indicator)
    graph_ids = np.unique(indicator)
    gid_index = {g: k for k, g in enumerate(graph_ids.tolist())}
    node_graph = np.array([gid_index[g] for g in indicator.tolist()], dtype=np.int64)
    # nodes of a graph are contiguous in practice, but don't rely on it
    local_id = np.zeros(num_total, dtype=np.int64)
    counts = np.zeros(len(graph_ids), dtype=np.int64)
    for n, g in enumerate(node_graph.tolist()):
        local_id[n] = counts[g]
        counts[g] += 1

    edge_buckets: list[list[tuple[int, int]]] = [[] for _ in graph_ids]
    a_path = path("A")
    for lineno, ln in enumerate(_read_lines(a_path), start=1):
        if not ln:
            continue
        parts = [p.strip() for p in ln.split(",")]
        try:
            i, j = (int(p) - 1 for p in parts)
        except ValueError:
            raise ParseError(f"expected 'i, j', got {ln!r}", a_path, lineno) from None
        if not (0 <= i < num_total and 0 <= j < num_total):
            raise ParseError(f"node id out of range in {ln!r}", a_path, lineno)
        gi, gj = node_graph[i], node_graph[j]
        if gi != gj:
            raise ParseError(f"edge {ln!r} joins two different graphs", a_path, lineno)
        edge_buckets[gi].append((local_id[i], local_id[j]))

    features = None
    if path("node_attributes").exists():
        attr_path = path("node_attributes")
        rows, width = [], None
        for lineno, ln in enumerate(_read_lines(attr_path), start=1):
            if not ln:
                continue
            try:
                row = [float(v) for v in ln.split(",")]
            except ValueError:
                raise ParseError(f"bad attribute row {ln!r}", attr_path, lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"attribute arity {len(row)} differs from {width}", attr_path, lineno
                )
            rows.append(row)
        if len(rows) != num_total:
            raise ParseError(f"{len(rows)} attribute rows for {num_total} nodes", attr_path)
        features = np.array(rows, dtype=np.float64)
    elif path("node_labels").exists():
        nl = _read_int_column(path("node_labels"))
        if len(nl) != num_total:
            raise ParseError(f"{len(nl)} node labels for {num_total} nodes", path("node_labels"))
        values, codes = np.unique(nl, return_inverse=True)
        features = np.zeros((num_total, len(values)))
        features[np.arange(num_total), codes] = 1.0

    labels = None
    num_classes = 0
    if path("graph_labels").exists():
        raw = _read_int_column(path("graph_labels"))
        if len(raw) != len(graph_ids):
            raise ParseError(f"{len(raw)} graph labels for {len(graph_ids)} graphs", path("graph_labels"))
        values, labels = np.unique(raw, return_inverse=True)
        num_classes = len(values)

    graphs = []
    for g in range(len(graph_ids)):
        members = np.flatnonzero(node_graph == g)
        edges = canonical_edges(edge_buckets[g]) if edge_buckets[g] else np.zeros((0, 2), np.int64)
        n = int(counts[g])
        if features is None:
            skeleton = Graph(n, edges, np.zeros((n, 1)))
            x = degree_one_hot(skeleton, degree_cap)
        else:
            x = features[members]
        graphs.append(Graph(n, edges, x, None if labels is None else int(labels[g])))
    return Dataset(graphs, "graph-level", name, num_classes)


def write_tudataset(dataset: Dataset, root, name: Optional[str] = None) -> Path:
    """Write a graph-level dataset in TUDataset text format; features go to ``node_attributes``."""
    name = name or dataset.name
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    offset = 0
    a_lines, ind_lines, attr_lines, label_lines = [], [], [], []
    for gid, g in enumerate(dataset.graphs, start=1):
        for i, j in g.edges.tolist():
            a_lines.append(f"{i + offset + 1}, {j + offset + 1}")
            a_lines.append(f"{j + offset + 1}, {i + offset + 1}")
        ind_lines.extend([str(gid)] * g.num_nodes)
        attr_lines.extend(", ".join(repr(float(v)) for v in row) for row in g.features)
        if g.label is not None:
            label_lines.append(str(g.label))
        offset += g.num_nodes

    def dump(suffix, lines):
        (root / f"{name}_{suffix}.txt").write_text("".join(ln + "\n" for ln in lines))

    dump("A", a_lines)
    dump("graph_indicator", ind_lines)
    dump("node_attributes", attr_lines)
    if len(label_lines) == len(dataset.graphs):
        dump("graph_labels", label_lines)
    return root


# --------------------------------------------------------------------------
# simple node-task format


def parse_node_dataset(root, name: Optional[str] = None) -> Dataset:
    """Read ``edges.txt``, ``features.txt`` and ``labels.txt`` (all 0-based) from ``root``."""
    root = Path(root)
    for fname in ("edges.txt", "features.txt", "labels.txt"):
        if not (root / fname).exists():
            raise ParseError("missing mandatory file", root / fname)

    rows, width = [], None
    for lineno, ln in enumerate(_read_lines(root / "features.txt"), start=1):
        if not ln:
            continue
        try:
            row = [float(v) for v in ln.split()]
        except ValueError:
            raise ParseError(f"bad feature row {ln!r}", root / "features.txt", lineno) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"ragged feature row: {len(row)} != {width}", root / "features.txt", lineno)
        rows.append(row)
    n = len(rows)
    x = np.array(rows, dtype=np.float64).reshape(n, width or 0)

    pairs = []
    for lineno, ln in enumerate(_read_lines(root / "edges.txt"), start=1):
        if not ln:
            continue
        parts = ln.split()
        try:
            u, v = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ParseError(f"expected 'u v', got {ln!r}", root / "edges.txt", lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"dangling edge endpoint in {ln!r}", root / "edges.txt", lineno)
        pairs.append((u, v))

    y = _read_int_column(root / "labels.txt")
    if len(y) != n:
        raise ParseError(f"{len(y)} labels for {n} nodes", root / "labels.txt")
    values, codes = np.unique(y, return_inverse=True)
    g = Graph(n, canonical_edges(pairs) if pairs else np.zeros((0, 2), np.int64), x)
    return Dataset([g], "node-level", name or root.name, len(values), node_labels=codes)


# --------------------------------------------------------------------------
# planted motifs

MOTIF_CYCLE = 0
MOTIF_CLIQUE = 1


@dataclass(frozen=True)
class MotifSpec:
    num_graphs: int = 100
    background_nodes: int = 20
    background_edge_prob: float = 0.08
    bridge_edges: int = 1
    degree_cap: int = 10

    def validate(self):
        if not 0.0 <= self.background_edge_prob <= 1.0:
            raise ConfigError("background_edge_prob must lie in [0, 1]")
        for fld in ("num_graphs", "background_nodes", "bridge_edges", "degree_cap"):
            if getattr(self, fld) < 1:
                raise ConfigError(f"{fld} must be >= 1")
        if self.bridge_edges > 5 * self.background_nodes:
            raise ConfigError("more bridge edges than motif/background node pairs")


def motif_edges(kind: int) -> list[tuple[int, int]]:
    """Internal edges of the 5-node motif on local ids 0..4."""
    if kind == MOTIF_CYCLE:
        return [(i, (i + 1) % 5) for i in range(5)]
    if kind == MOTIF_CLIQUE:
        return list(itertools.combinations(range(5), 2))
    raise ValueError(f"unknown motif kind {kind}")


def generate_motif_dataset(spec: MotifSpec = MotifSpec(), seed: int = 0) -> Dataset:
    """Erdos-Renyi backgrounds, each carrying one 5-cycle (label 0) or 5-clique (label 1).

    Node ids are shuffled so the motif does not sit at a fixed position;
    ``metadata["motif_nodes"][k]`` lists the motif node ids of graph ``k``.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    nb = spec.background_nodes
    n = nb + 5
    kinds = np.array([MOTIF_CYCLE, MOTIF_CLIQUE] * ((spec.num_graphs + 1) // 2))[: spec.num_graphs]
    rng.shuffle(kinds)

    iu, ju = np.triu_indices(nb, k=1)
    graphs, motif_nodes = [], []
    for kind in kinds.tolist():
        keep = rng.random(len(iu)) < spec.background_edge_prob
        pairs = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        pairs += [(nb + a, nb + b) for a, b in motif_edges(kind)]
        bridge_pool = [(m, b) for m in range(nb, n) for b in range(nb)]
        for k in rng.choice(len(bridge_pool), size=spec.bridge_edges, replace=False).tolist():
            pairs.append(bridge_pool[k])
        perm = rng.permutation(n)
        pairs = [(perm[a], perm[b]) for a, b in pairs]
        skeleton = Graph(n, canonical_edges(pairs), np.zeros((n, 1)))
        graphs.append(Graph(n, skeleton.edges, degree_one_hot(skeleton, spec.degree_cap), kind))
        motif_nodes.append(np.sort(perm[nb:]))
    return Dataset(
        graphs,
        "graph-level",
        "synthetic:motif",
        2,
        metadata={"motif_nodes": motif_nodes, "spec": spec, "seed": seed},
    )


def motif_membership(dataset: Dataset) -> list[np.ndarray]:
    """Boolean per-node motif indicator for each graph of a motif dataset."""
    out = []
    for g, nodes in zip(dataset.graphs, dataset.metadata["motif_nodes"]):
        mask = np.zeros(g.num_nodes, dtype=bool)
        mask[nodes] = True
        out.append(mask)
    return out


def subgraph(g: Graph, nodes: Sequence[int]) -> Graph:
    """Induced subgraph on ``nodes`` (relabelled in the given order)."""
    nodes = list(nodes)
    pos = {v: k for k, v in enumerate(nodes)}
    pairs = [(pos[i], pos[j]) for i, j in g.edges.tolist() if i in pos and j in pos]
    return Graph(len(nodes), canonical_edges(pairs) if pairs else np.zeros((0, 2), np.int64), g.features[nodes], g.label)
