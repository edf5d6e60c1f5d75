"""On-disk dataset format and synthetic stochastic-block-model tasks.

A dataset directory holds::

    edges.tsv      two whitespace-separated 0-based node ids per line
    features.csv   one comma-separated row of reals per node
    labels.csv     one integer class per line
    split_<k>.json {"train": [...], "val": [...], "test": [...]}
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, NodeData, Split, edge_homophily, node_homophily, spectral_radius

__all__ = [
    "DatasetError",
    "SbmSpec",
    "generate_sbm",
    "sbm_splits",
    "stratified_split",
    "load_dataset",
    "write_dataset",
    "dataset_stats",
]

logger = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.48, 0.32, 0.20)


class DatasetError(ValueError):
    """Malformed dataset; the message names the file and line."""


def _fail(path: Path, line: int | None, msg: str):
    where = f"{path}:{line}" if line is not None else str(path)
    raise DatasetError(f"{where}: {msg}")


def _read_edges(path: Path, num_nodes: int) -> np.ndarray:
    edges = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 2:
                _fail(path, lineno, f"expected two node ids, got {len(parts)} fields")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                _fail(path, lineno, f"non-integer node id in {line.strip()!r}")
            for node in (u, v):
                if not 0 <= node < num_nodes:
                    _fail(path, lineno, f"node id {node} out of range [0, {num_nodes})")
            edges.append((u, v))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _read_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(x) for x in line.split(",")]
            except ValueError:
                _fail(path, lineno, "non-numeric feature value")
            if width is None:
                width = len(row)
            elif len(row) != width:
                _fail(path, lineno, f"expected {width} features, got {len(row)}")
            if not np.all(np.isfinite(row)):
                _fail(path, lineno, "non-finite feature value")
            rows.append(row)
    if not rows:
        _fail(path, None, "no feature rows")
    return np.array(rows, dtype=np.float64)


def _read_labels(path: Path) -> np.ndarray:
    labels = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                _fail(path, lineno, f"non-integer label {line!r}")
            if labels[-1] < 0:
                _fail(path, lineno, "negative label")
    return np.array(labels, dtype=np.int64)


def _read_split(path: Path, num_nodes: int) -> Split:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        _fail(path, exc.lineno, f"invalid JSON: {exc.msg}")
    if isinstance(data, dict):
        try:
            parts = [data["train"], data["val"], data["test"]]
        except KeyError as exc:
            _fail(path, None, f"missing key {exc.args[0]!r}")
    elif isinstance(data, list) and len(data) == 3:
        parts = data
    else:
        _fail(path, None, "expected train/val/test index arrays")
    for name, idx in zip(("train", "val", "test"), parts):
        bad = [i for i in idx if not isinstance(i, int) or not 0 <= i < num_nodes]
        if bad:
            _fail(path, None, f"{name} index {bad[0]!r} out of range [0, {num_nodes})")
    try:
        return Split.from_indices(num_nodes, *parts)
    except GraphError as exc:
        _fail(path, None, str(exc))


def _split_key(path: Path) -> int:
    return int(re.fullmatch(r"split_(\d+)\.json", path.name).group(1))


def load_dataset(path, directed: bool = False) -> tuple[Graph, NodeData, list[Split]]:
    """Load and validate a dataset directory.

    Edges are symmetrized and deduplicated unless ``directed``. The returned
    NodeData carries the masks of the first split (empty masks if there are
    no split files).
    """
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a dataset directory")
    for name in ("edges.tsv", "features.csv", "labels.csv"):
        if not (root / name).is_file():
            _fail(root / name, None, "missing file")
    features = _read_features(root / "features.csv")
    labels = _read_labels(root / "labels.csv")
    n = features.shape[0]
    if labels.size != n:
        _fail(root / "labels.csv", None, f"{labels.size} labels for {n} feature rows")
    edges = _read_edges(root / "edges.tsv", n)
    graph = Graph.from_edges(n, edges, directed=directed)
    split_files = sorted((p for p in root.glob("split_*.json")
                          if re.fullmatch(r"split_\d+\.json", p.name)), key=_split_key)
    splits = [_read_split(p, n) for p in split_files]
    num_classes = int(labels.max()) + 1 if labels.size else 0
    data = NodeData(features, labels, num_classes)
    if splits:
        data = data.with_split(splits[0])
    if logger.isEnabledFor(logging.INFO):
        logger.info("loaded %s: %s", root, dataset_stats(graph, data))
    return graph, data, splits


def write_dataset(path, graph: Graph, data: NodeData, splits: list[Split]) -> None:
    """Write a dataset in the on-disk format; undirected edges are written once."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    e = graph.edges()
    if graph.is_symmetric():
        e = e[e[:, 0] <= e[:, 1]]
    np.savetxt(root / "edges.tsv", e, fmt="%d", delimiter="\t")
    np.savetxt(root / "features.csv", data.features, fmt="%.17g", delimiter=",")
    np.savetxt(root / "labels.csv", data.labels, fmt="%d")
    for k, split in enumerate(splits):
        train, val, test = split.indices()
        payload = {"train": train.tolist(), "val": val.tolist(), "test": test.tolist()}
        (root / f"split_{k}.json").write_text(json.dumps(payload))


def dataset_stats(graph: Graph, data: NodeData) -> dict:
    """Nodes, edges, radius, homophily, feature and class counts.

    ``edges`` counts undirected edges for symmetric graphs (each stored
    twice as edge slots). Homophily is ``None`` for edgeless graphs.
    """
    symmetric = graph.is_symmetric()
    loops = int(np.count_nonzero(graph.edges()[:, 0] == graph.edges()[:, 1]))
    edges = (graph.num_edges + loops) // 2 if symmetric else graph.num_edges
    alpha = spectral_radius(graph) if graph.num_nodes else None
    has_edges = graph.num_edges > 0
    return {
        "nodes": graph.num_nodes,
        "edges": edges,
        "edge_slots": graph.num_edges,
        "radius": float(alpha) if alpha is not None else None,
        "radius_converged": alpha.converged if alpha is not None else None,
        "edge_homophily": edge_homophily(graph, data.labels) if has_edges else None,
        "node_homophily": node_homophily(graph, data.labels) if has_edges else None,
        "features": data.feature_dim,
        "classes": data.num_classes,
    }


@dataclass(frozen=True)
class SbmSpec:
    num_nodes: int
    num_classes: int
    p_in: float
    p_out: float
    feature_dim: int = 16
    feature_signal: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_nodes < self.num_classes:
            raise ValueError("need at least one node per class")
        if not (0 <= self.p_in <= 1 and 0 <= self.p_out <= 1):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.feature_signal < 0:
            raise ValueError("feature_signal must be >= 0")

    def class_sizes(self) -> np.ndarray:
        """Equal blocks; the remainder goes to the lowest class indices."""
        base, rem = divmod(self.num_nodes, self.num_classes)
        return np.array([base + (c < rem) for c in range(self.num_classes)])

    def expected_edges(self) -> float:
        """Expected number of undirected edges."""
        sizes = self.class_sizes().astype(float)
        intra = float(np.sum(sizes * (sizes - 1) / 2))
        total = self.num_nodes * (self.num_nodes - 1) / 2
        return self.p_in * intra + self.p_out * (total - intra)


def _sample_edges(spec: SbmSpec, rng: np.random.Generator) -> np.ndarray:
    sizes = spec.class_sizes()
    starts = np.concatenate([[0], np.cumsum(sizes)])
    parts = []
    for a in range(spec.num_classes):
        for b in range(a, spec.num_classes):
            p = spec.p_in if a == b else spec.p_out
            hits = rng.random((sizes[a], sizes[b])) < p
            if a == b:
                hits = np.triu(hits, k=1)
            i, j = np.nonzero(hits)
            parts.append(np.column_stack([i + starts[a], j + starts[b]]))
    return np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)


def generate_sbm(spec: SbmSpec) -> tuple[Graph, NodeData]:
    """Sample an undirected SBM graph with class-dependent Gaussian features.

    Features are ``feature_signal * mean[y_v] + N(0, I)``; class means are
    scaled standard basis vectors when ``feature_dim >= num_classes``,
    otherwise random unit vectors. The returned NodeData carries the first
    split of :func:`sbm_splits`.
    """
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat(np.arange(spec.num_classes), spec.class_sizes())
    edges = _sample_edges(spec, rng)
    if edges.size == 0 and (spec.p_in > 0 or spec.p_out > 0):
        edges = _sample_edges(spec, rng)
        if edges.size == 0:
            raise DatasetError("SBM draw produced no edges twice; raise the edge probabilities")
    graph = Graph.ensure_undirected(spec.num_nodes, edges)
    if spec.feature_dim >= spec.num_classes:
        means = np.eye(spec.num_classes, spec.feature_dim)
    else:
        means = rng.standard_normal((spec.num_classes, spec.feature_dim))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
    features = spec.feature_signal * means[labels] + rng.standard_normal(
        (spec.num_nodes, spec.feature_dim))
    data = NodeData(features, labels, spec.num_classes)
    return graph, data.with_split(sbm_splits(spec, 1)[0])


def sbm_splits(spec: SbmSpec, num_splits: int) -> list[Split]:
    """Stratified 48/32/20 splits, seeded from ``spec.seed``."""
    labels = np.repeat(np.arange(spec.num_classes), spec.class_sizes())
    seeds = np.random.SeedSequence(spec.seed).spawn(num_splits)
    return [stratified_split(labels, np.random.default_rng(s)) for s in seeds]


def stratified_split(labels, rng: np.random.Generator,
                     fractions: tuple[float, float, float] = SPLIT_FRACTIONS) -> Split:
    """Per-class shuffled split into train/val/test by ``fractions``."""
    labels = np.asarray(labels)
    n = labels.size
    train, val, test = (np.zeros(n, dtype=bool) for _ in range(3))
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_train = int(round(fractions[0] * idx.size))
        n_val = int(round(fractions[1] * idx.size))
        train[idx[:n_train]] = True
        val[idx[n_train:n_train + n_val]] = True
        test[idx[n_train + n_val:]] = True
    return Split(train, val, test)
