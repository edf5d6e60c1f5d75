"""Graph storage and the structural statistics used throughout the toolkit.

Graphs are stored in compressed-row form over directed edge slots: an
undirected edge {u, v} occupies two slots, (u, v) and (v, u).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .linalg import Estimate, norm_growth_power_iteration, spectral_norm

__all__ = [
    "Graph",
    "NodeData",
    "Split",
    "PathDistribution",
    "GraphError",
    "spectral_radius",
    "adjacency_norm",
    "edge_homophily",
    "node_homophily",
    "shortest_path_distribution",
]


class GraphError(ValueError):
    """Raised for invalid graph construction or undefined statistics."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable sparse adjacency in compressed-row form.

    Attributes
    ----------
    num_nodes : int
    row_offsets : ndarray of int64, shape (num_nodes + 1,)
        Edge slots of node ``v`` are ``col_indices[row_offsets[v]:row_offsets[v + 1]]``.
    col_indices : ndarray of int64, shape (num_edges,)
        Strictly increasing within each row.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.row_offsets, dtype=np.int64)
        cols = np.asarray(self.col_indices, dtype=np.int64)
        offsets.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        self._validate()

    def _validate(self) -> None:
        n = self.num_nodes
        if n < 0:
            raise GraphError("num_nodes must be non-negative")
        if self.row_offsets.shape != (n + 1,):
            raise GraphError(f"row_offsets must have length {n + 1}")
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != self.col_indices.size:
            raise GraphError("row_offsets must start at 0 and end at num_edges")
        if np.any(np.diff(self.row_offsets) < 0):
            raise GraphError("row_offsets must be non-decreasing")
        if self.col_indices.size and (self.col_indices.min() < 0 or self.col_indices.max() >= n):
            raise GraphError("col_indices out of range [0, num_nodes)")
        if self.col_indices.size > 1:
            steps = np.diff(self.col_indices)
            # Steps across row boundaries are allowed to decrease.
            inner = np.ones(steps.size, dtype=bool)
            boundaries = self.row_offsets[1:-1]
            boundaries = boundaries[(boundaries > 0) & (boundaries < self.col_indices.size)]
            inner[boundaries - 1] = False
            if np.any(steps[inner] <= 0):
                raise GraphError("col_indices must be strictly increasing within each row")

    @property
    def num_edges(self) -> int:
        """Number of stored directed edge slots."""
        return int(self.col_indices.size)

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[tuple[int, int]] | np.ndarray,
                   directed: bool = False) -> Graph:
        """Build a graph from an edge list, deduplicating repeated edges.

        Unless ``directed`` is set, every edge is inserted in both
        directions. Self-loops are kept as given and never added.
        """
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
            raise GraphError("edge endpoint out of range [0, num_nodes)")
        src, dst = arr[:, 0], arr[:, 1]
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        keys = np.unique(src * max(num_nodes, 1) + dst)
        src, dst = np.divmod(keys, max(num_nodes, 1))
        counts = np.bincount(src, minlength=num_nodes)
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return cls(num_nodes, offsets, dst)

    @classmethod
    def ensure_undirected(cls, num_nodes: int, edges) -> Graph:
        """Symmetrize and deduplicate an edge list."""
        return cls.from_edges(num_nodes, edges, directed=False)

    @classmethod
    def from_scipy(cls, matrix) -> Graph:
        m = sp.csr_matrix(matrix)
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return cls(m.shape[0], m.indptr.astype(np.int64), m.indices.astype(np.int64))

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Binary adjacency as a scipy CSR matrix (float64)."""
        data = np.ones(self.num_edges)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.num_nodes, self.num_nodes))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def edges(self) -> np.ndarray:
        """All edge slots as an array of shape (num_edges, 2)."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        return np.column_stack([src, self.col_indices])

    def is_symmetric(self) -> bool:
        a = self.adjacency
        return (a != a.T).nnz == 0

    def permute(self, perm: np.ndarray) -> Graph:
        """Relabel nodes so that old node ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm)
        e = self.edges()
        return Graph.from_edges(self.num_nodes, perm[e], directed=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.num_nodes == other.num_nodes
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    __hash__ = None


@dataclass(frozen=True)
class Split:
    """Disjoint boolean train/validation/test masks over nodes."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.asarray(getattr(self, name), dtype=bool)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.train.shape == self.val.shape == self.test.shape):
            raise GraphError("split masks must have equal length")
        if np.any(self.train & self.val) or np.any(self.train & self.test) or np.any(self.val & self.test):
            raise GraphError("split masks must be disjoint")

    @classmethod
    def from_indices(cls, num_nodes: int, train, val, test) -> Split:
        masks = []
        for idx in (train, val, test):
            m = np.zeros(num_nodes, dtype=bool)
            m[np.asarray(idx, dtype=np.int64)] = True
            masks.append(m)
        return cls(*masks)

    def indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.flatnonzero(m) for m in (self.train, self.val, self.test))


@dataclass(frozen=True)
class NodeData:
    """Node features, integer labels in ``[0, num_classes)`` and split masks."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    train_mask: np.ndarray = field(default=None)
    val_mask: np.ndarray = field(default=None)
    test_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        if feats.ndim != 2:
            raise GraphError("features must be a 2-D matrix")
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        n = feats.shape[0]
        if labels.shape != (n,):
            raise GraphError("every node needs exactly one label")
        if n and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise GraphError("labels must lie in [0, num_classes)")
        masks = []
        for m in (self.train_mask, self.val_mask, self.test_mask):
            masks.append(np.zeros(n, dtype=bool) if m is None else np.asarray(m, dtype=bool))
        split = Split(*masks)
        if split.train.shape != (n,):
            raise GraphError("mask length must equal the number of nodes")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "train_mask", split.train)
        object.__setattr__(self, "val_mask", split.val)
        object.__setattr__(self, "test_mask", split.test)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def split(self) -> Split:
        return Split(self.train_mask, self.val_mask, self.test_mask)

    def with_split(self, split: Split) -> NodeData:
        return NodeData(self.features, self.labels, self.num_classes,
                        split.train, split.val, split.test)

    def with_features(self, features: np.ndarray) -> NodeData:
        return NodeData(features, self.labels, self.num_classes,
                        self.train_mask, self.val_mask, self.test_mask)


def spectral_radius(graph: Graph, tol: float = 1e-8, max_iters: int = 10_000) -> Estimate:
    """Spectral radius of the adjacency matrix by power iteration.

    Starts from the normalized all-ones vector. Returns an :class:`Estimate`
    whose ``converged`` flag must be checked; ``float(estimate)`` gives the
    value.
    """
    if graph.num_nodes < 1:
        raise GraphError("spectral radius needs at least one node")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return norm_growth_power_iteration(graph.adjacency, tol=tol, max_iters=max_iters)


def adjacency_norm(graph: Graph, tol: float = 1e-10) -> float:
    """Spectral norm of the adjacency (equals the radius when symmetric)."""
    if graph.num_edges == 0:
        return 0.0
    return spectral_norm(graph.adjacency, tol=tol).value


def edge_homophily(graph: Graph, labels) -> float:
    """Fraction of edge slots joining two nodes of the same class."""
    labels = np.asarray(labels)
    if labels.shape != (graph.num_nodes,):
        raise GraphError("labels must cover all nodes")
    if graph.num_edges == 0:
        raise GraphError("edge homophily is undefined for a graph without edges")
    e = graph.edges()
    return float(np.mean(labels[e[:, 0]] == labels[e[:, 1]]))


def node_homophily(graph: Graph, labels) -> float:
    """Mean over non-isolated nodes of the same-class neighbour fraction."""
    labels = np.asarray(labels)
    if labels.shape != (graph.num_nodes,):
        raise GraphError("labels must cover all nodes")
    deg = graph.degrees
    if not np.any(deg > 0):
        raise GraphError("node homophily is undefined when every node is isolated")
    e = graph.edges()
    same = np.bincount(e[:, 0], weights=(labels[e[:, 0]] == labels[e[:, 1]]).astype(float),
                       minlength=graph.num_nodes)
    keep = deg > 0
    return float(np.mean(same[keep] / deg[keep]))


@dataclass(frozen=True)
class PathDistribution:
    """Histogram of shortest-path lengths over unordered node pairs.

    ``counts[d]`` is the number of unordered pairs at distance exactly ``d``.
    """

    counts: dict[int, int]
    num_unreachable_pairs: int
    num_nodes: int

    @property
    def num_reachable_pairs(self) -> int:
        return sum(self.counts.values())

    @property
    def diameter(self) -> int:
        """Longest finite shortest path (0 when no pair is reachable)."""
        return max(self.counts, default=0)

    def ecd(self, d: float) -> float:
        """Fraction of reachable pairs at distance <= d."""
        total = self.num_reachable_pairs
        if total == 0:
            return 0.0
        return sum(c for length, c in self.counts.items() if length <= d) / total

    def percentile(self, p: float) -> int:
        """Smallest length ``d`` with ``ecd(d) >= p / 100``."""
        if not 0 <= p <= 100:
            raise ValueError("percentile must be in [0, 100]")
        total = self.num_reachable_pairs
        if total == 0:
            return 0
        running = 0
        for length in sorted(self.counts):
            running += self.counts[length]
            # Integer comparison avoids rounding at exact boundaries.
            if running * 100 >= p * total:
                return length
        return self.diameter


def _histogram_chunk(adjacency, sources: np.ndarray) -> np.ndarray:
    dist = csgraph.shortest_path(adjacency, method="D", directed=False, unweighted=True,
                                 indices=sources)
    # Count each unordered pair once, from its lower-indexed endpoint.
    cols = np.arange(adjacency.shape[0])
    upper = cols[None, :] > sources[:, None]
    d = dist[upper]
    finite = d[np.isfinite(d)].astype(np.int64)
    hist = np.bincount(finite, minlength=1)
    unreachable = int(np.count_nonzero(~np.isfinite(d)))
    out = np.zeros(max(hist.size, 1) + 1, dtype=np.int64)
    out[0] = unreachable
    out[1:hist.size + 1] = hist
    return out


def shortest_path_distribution(graph: Graph, chunk_size: int = 256,
                               workers: int = 1) -> PathDistribution:
    """Exact unweighted all-pairs shortest-path histogram.

    Runs a breadth-first search from every node, in chunks of sources to
    bound memory. Edge direction is ignored. Chunk results are merged by
    addition, so the histogram does not depend on ``workers``.
    """
    n = graph.num_nodes
    if n < 2:
        return PathDistribution({}, 0, n)
    adjacency = graph.adjacency
    chunks = [np.arange(s, min(s + chunk_size, n)) for s in range(0, n - 1, chunk_size)]
    if workers > 1 and len(chunks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_histogram_chunk, [adjacency] * len(chunks), chunks))
    else:
        parts = [_histogram_chunk(adjacency, c) for c in chunks]
    width = max(p.size for p in parts)
    total = np.zeros(width, dtype=np.int64)
    for p in parts:
        total[:p.size] += p
    unreachable = int(total[0])
    # Slot 1 holds distance 0, which never occurs for distinct nodes.
    counts = {d: int(c) for d, c in enumerate(total[2:], start=1) if c}
    return PathDistribution(counts, unreachable, n)
