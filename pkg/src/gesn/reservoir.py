"""Untrained graph reservoir: weight initialization, state iteration and
the stability/sensitivity diagnostics attached to it.

Node states follow

    h_v(k) = tanh(W_in x_v + sum_{u in N(v)} W h_u(k-1)),   h_v(0) = 0,

with no input bias. Aggregation runs over the raw (unnormalized) adjacency.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import pdist

from .graph import Graph
from .linalg import spectral_norm, subspace_spectral_radius

__all__ = [
    "ReservoirConfig",
    "Reservoir",
    "Embeddings",
    "ReservoirError",
    "StabilityReport",
    "init_reservoir",
    "iterate_states",
    "compute_embeddings",
    "sensitivity_terms",
    "sensitivity_bound",
    "stability_regime",
    "separability_statistic",
    "SEPARABILITY_CAP",
]

RADIUS_TOL = 1e-6
RADIUS_MAX_ITERS = 5_000
MAX_REDRAWS = 3
SEPARABILITY_CAP = 1e6
EMBEDDING_MAGIC = b"GESNEMB1"
_TANH_MAX = np.nextafter(1.0, 0.0)


class ReservoirError(ValueError):
    """Invalid reservoir configuration, degenerate draw, or shape mismatch."""


def default_density(hidden_units: int) -> float:
    """About ten expected nonzeros per recurrent row."""
    return min(1.0, 10.0 / hidden_units)


@dataclass(frozen=True)
class ReservoirConfig:
    hidden_units: int
    target_radius: float
    input_scaling: float = 1.0
    recurrent_density: float | None = None
    iterations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ReservoirError("hidden_units must be >= 1")
        if self.recurrent_density is None:
            object.__setattr__(self, "recurrent_density", default_density(self.hidden_units))
        if self.iterations < 1:
            raise ReservoirError("iterations must be >= 1")
        if not self.target_radius > 0:
            raise ReservoirError("target_radius must be > 0")
        if not self.input_scaling > 0:
            raise ReservoirError("input_scaling must be > 0")
        if not 0 < self.recurrent_density <= 1:
            raise ReservoirError("recurrent_density must be in (0, 1]")
        if self.recurrent_density * self.hidden_units ** 2 < self.hidden_units:
            raise ReservoirError("recurrent_density too low: fewer than one expected nonzero per row")


@dataclass(frozen=True, eq=False)
class Reservoir:
    """Frozen reservoir weights.

    ``recurrent_weights`` is a CSR matrix rescaled so that its estimated
    spectral radius equals ``config.target_radius``.
    """

    config: ReservoirConfig
    input_weights: np.ndarray
    recurrent_weights: sp.csr_matrix
    achieved_radius: float
    achieved_spectral_norm: float

    def __post_init__(self):
        self.input_weights.setflags(write=False)
        for arr in (self.recurrent_weights.data, self.recurrent_weights.indices,
                    self.recurrent_weights.indptr):
            arr.setflags(write=False)

    @property
    def hidden_units(self) -> int:
        return self.input_weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.input_weights.shape[1]

    @cached_property
    def input_norm(self) -> float:
        """Spectral norm estimate of the input weights."""
        return spectral_norm(self.input_weights).value


def _draw(config: ReservoirConfig, input_dim: int, rng: np.random.Generator):
    h = config.hidden_units
    w_in = rng.uniform(-1.0, 1.0, size=(h, input_dim)) * config.input_scaling
    w = sp.random(h, h, density=config.recurrent_density, format="csr", random_state=rng,
                  data_rvs=lambda k: rng.uniform(-1.0, 1.0, size=k))
    w.sort_indices()
    return w_in, w


def init_reservoir(config: ReservoirConfig, input_dim: int) -> Reservoir:
    """Draw reservoir weights and rescale the recurrent matrix to the target radius.

    Deterministic given ``config.seed``. A draw whose recurrent matrix has
    (numerically) zero spectral radius is redrawn with a perturbed seed, at
    most three times.
    """
    if input_dim < 1:
        raise ReservoirError("input_dim must be >= 1")
    for attempt in range(MAX_REDRAWS + 1):
        seed = config.seed if attempt == 0 else [config.seed, attempt]
        w_in, w = _draw(config, input_dim, np.random.default_rng(seed))
        scale = float(np.max(np.abs(w.data))) if w.nnz else 0.0
        rho = subspace_spectral_radius(w, tol=RADIUS_TOL, max_iters=RADIUS_MAX_ITERS).value
        if scale > 0 and rho > 1e-10 * scale:
            break
    else:
        raise ReservoirError(
            f"recurrent matrix has zero spectral radius after {MAX_REDRAWS} redraws; "
            "increase recurrent_density or hidden_units")
    w = w * (config.target_radius / rho)
    w.sort_indices()
    achieved = subspace_spectral_radius(w, tol=RADIUS_TOL, max_iters=RADIUS_MAX_ITERS).value
    return Reservoir(config, w_in, w, achieved, spectral_norm(w).value)


@dataclass(frozen=True)
class Embeddings:
    """Node states after ``iterations_used`` steps; shape (num_nodes, H)."""

    states: np.ndarray
    iterations_used: int

    def to_binary(self, path) -> None:
        """Little-endian float64, row-major, after a 16-byte header
        (8-byte magic, uint32 node count, uint32 width)."""
        n, h = self.states.shape
        with open(path, "wb") as f:
            f.write(EMBEDDING_MAGIC + struct.pack("<II", n, h))
            f.write(np.ascontiguousarray(self.states, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path, iterations_used: int = 0) -> Embeddings:
        raw = Path(path).read_bytes()
        if raw[:8] != EMBEDDING_MAGIC:
            raise ValueError(f"{path}: not an embedding file")
        n, h = struct.unpack("<II", raw[8:16])
        states = np.frombuffer(raw[16:], dtype="<f8")
        if states.size != n * h:
            raise ValueError(f"{path}: truncated payload")
        return cls(states.reshape(n, h).astype(np.float64), iterations_used)

    def to_csv(self, path) -> None:
        h = self.states.shape[1]
        header = ",".join(f"h{i}" for i in range(h))
        np.savetxt(path, self.states, delimiter=",", header=header, comments="", fmt="%.17g")


def _check_inputs(reservoir: Reservoir, graph: Graph, features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ReservoirError("features must be a 2-D matrix")
    if features.shape[1] != reservoir.input_dim:
        raise ReservoirError(
            f"feature width {features.shape[1]} != reservoir input width {reservoir.input_dim}")
    if features.shape[0] != graph.num_nodes:
        raise ReservoirError(
            f"feature rows {features.shape[0]} != graph nodes {graph.num_nodes}")
    return features


def iterate_states(reservoir: Reservoir, graph: Graph, features, iterations: int,
                   initial_state: np.ndarray | None = None) -> Iterator[np.ndarray]:
    """Yield the state matrix after each of ``iterations`` steps.

    The input projection is computed once and reused. Yielded arrays are
    fresh on every step and may be kept by the caller.
    """
    features = _check_inputs(reservoir, graph, features)
    n, h = graph.num_nodes, reservoir.hidden_units
    drive = features @ reservoir.input_weights.T
    if initial_state is None:
        state = np.zeros((n, h))
    else:
        state = np.array(initial_state, dtype=np.float64)
        if state.shape != (n, h):
            raise ReservoirError(f"initial_state must have shape {(n, h)}")
    adjacency = graph.adjacency
    w = reservoir.recurrent_weights
    for _ in range(iterations):
        # Rows of A @ (S W^T) are the neighbour sums of W h_u.
        state = np.tanh(drive + adjacency @ np.asarray((w @ state.T).T))
        # Double-precision tanh rounds to +-1 beyond |x| ~ 19; keep the
        # largest representable value strictly inside the open interval.
        np.clip(state, -_TANH_MAX, _TANH_MAX, out=state)
        yield state


def compute_embeddings(reservoir: Reservoir, graph: Graph, features,
                       iterations: int | None = None) -> Embeddings:
    """Run the state system from the zero state for ``iterations`` steps
    (default: the reservoir config's ``iterations``)."""
    k = reservoir.config.iterations if iterations is None else iterations
    if k < 1:
        raise ReservoirError("iterations must be >= 1")
    state = None
    for state in iterate_states(reservoir, graph, features, k):
        pass
    return Embeddings(state, k)


def sensitivity_terms(reservoir: Reservoir, graph: Graph, iterations: int, v: int,
                      u: int) -> np.ndarray:
    """Per-path-length terms ``||W||^l ||W_in|| (A^l)[v, u]`` for ``l < iterations``.

    Column ``u`` of ``A^l`` is built by repeated sparse mat-vec; no dense
    matrix power is formed.
    """
    n = graph.num_nodes
    if not (0 <= v < n and 0 <= u < n):
        raise ReservoirError(f"node ids must be in [0, {n})")
    if iterations < 1:
        raise ReservoirError("iterations must be >= 1")
    col = np.zeros(n)
    col[u] = 1.0
    w_norm, in_norm = reservoir.achieved_spectral_norm, reservoir.input_norm
    adjacency = graph.adjacency
    terms = np.empty(iterations)
    for ell in range(iterations):
        terms[ell] = w_norm ** ell * in_norm * col[v]
        col = adjacency @ col
    return terms


def sensitivity_bound(reservoir: Reservoir, graph: Graph, iterations: int, v: int,
                      u: int) -> float:
    """Upper bound on ``||d h_v(K) / d x_u||_2`` summed over path lengths 0..K-1."""
    return float(np.sum(sensitivity_terms(reservoir, graph, iterations, v, u)))


@dataclass(frozen=True)
class StabilityReport:
    regime: str  # "contractive", "necessary-violated" or "indeterminate"
    spectral_norm: float
    radius: float
    alpha: float
    adjacency_norm: float
    lipschitz: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lipschitz", self.spectral_norm * self.adjacency_norm)


def stability_regime(reservoir: Reservoir, alpha: float,
                     adjacency_norm: float | None = None) -> StabilityReport:
    """Classify the reservoir against the graph's spectral quantities.

    ``adjacency_norm`` defaults to ``alpha``, which is exact for symmetric
    adjacency.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    a_norm = alpha if adjacency_norm is None else adjacency_norm
    w_norm, rho = reservoir.achieved_spectral_norm, reservoir.achieved_radius
    if w_norm * a_norm < 1:
        regime = "contractive"
    elif rho * alpha >= 1:
        regime = "necessary-violated"
    else:
        regime = "indeterminate"
    return StabilityReport(regime, w_norm, rho, alpha, a_norm)


def separability_statistic(embeddings: Embeddings | np.ndarray, labels, max_nodes: int = 2000,
                           seed: int = 0) -> float:
    """Mean inter-class over mean intra-class pairwise Euclidean distance.

    Computed on a fixed-seed subsample of at most ``max_nodes`` nodes.
    Values above one mean classes are spread apart; the result is capped at
    ``SEPARABILITY_CAP`` when intra-class distances vanish.
    """
    states = embeddings.states if isinstance(embeddings, Embeddings) else np.asarray(embeddings)
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise ValueError("separability needs at least two classes")
    idx = np.arange(states.shape[0])
    if idx.size > max_nodes:
        idx = np.sort(np.random.default_rng(seed).choice(idx, size=max_nodes, replace=False))
    x, y = states[idx], labels[idx]
    dist = pdist(x)
    i, j = np.triu_indices(idx.size, k=1)
    same = y[i] == y[j]
    if not np.any(same):
        raise ValueError("no class has two sampled nodes")
    if np.all(same):
        raise ValueError("subsample contains a single class")
    intra, inter = dist[same].mean(), dist[~same].mean()
    if intra == 0.0:
        if inter == 0.0:
            raise ValueError("degenerate embeddings: all pairwise distances are zero")
        return SEPARABILITY_CAP
    return float(min(inter / intra, SEPARABILITY_CAP))
