"""Single-run training and the analysis sweeps exposed by the CLI."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csgraph

from .graph import Graph, NodeData, Split, shortest_path_distribution, spectral_radius
from .readout import accuracy, fit_ridge, predict
from .reservoir import (
    Reservoir,
    ReservoirConfig,
    compute_embeddings,
    init_reservoir,
    iterate_states,
    sensitivity_terms,
)
from .selection import GridSpec, derive_seed, grid_search

__all__ = [
    "TrainResult",
    "train_once",
    "iteration_curve",
    "radius_scaling_heatmap",
    "sensitivity_table",
    "node_distance",
]


@dataclass
class TrainResult:
    predictions: np.ndarray
    metrics: dict
    timings: dict


def train_once(graph: Graph, data: NodeData, split: Split, config: ReservoirConfig,
               lam: float) -> TrainResult:
    """Embed, fit and evaluate once. Timings are kept apart from metrics
    so that metrics stay reproducible."""
    t0 = time.perf_counter()
    reservoir = init_reservoir(config, data.feature_dim)
    emb = compute_embeddings(reservoir, graph, data.features)
    t1 = time.perf_counter()
    readout = fit_ridge(emb, data.labels, split.train, lam, data.num_classes)
    t2 = time.perf_counter()
    pred = predict(readout, emb)
    t3 = time.perf_counter()
    metrics = {
        "train_accuracy": accuracy(pred, data.labels, split.train),
        "val_accuracy": accuracy(pred, data.labels, split.val) if split.val.any() else None,
        "test_accuracy": accuracy(pred, data.labels, split.test) if split.test.any() else None,
        "achieved_radius": reservoir.achieved_radius,
        "recurrent_spectral_norm": reservoir.achieved_spectral_norm,
        "iterations": emb.iterations_used,
    }
    timings = {"embed_seconds": t1 - t0, "fit_seconds": t2 - t1, "inference_seconds": t3 - t2}
    return TrainResult(pred, metrics, timings)


def iteration_curve(graph: Graph, data: NodeData, splits: Sequence[Split], units: int,
                    radius: float, scaling: float, lam: float, k_values: Sequence[int],
                    seeds: int = 1, master_seed: int = 0,
                    density: float | None = None) -> list[dict]:
    """Mean test accuracy for each ``K`` in ``k_values`` next to the
    shortest-path ECD at ``K - 1``.

    ``radius`` is a multiple of ``1/alpha``. One state sequence up to
    ``max(k_values)`` is computed per (split, seed) and read off at each K.
    """
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values or k_values[0] < 1:
        raise ValueError("iteration counts must be >= 1")
    alpha = spectral_radius(graph).value
    paths = shortest_path_distribution(graph)
    wanted = set(k_values)
    totals = {k: [] for k in k_values}
    for split_id, split in enumerate(splits):
        for rep in range(seeds):
            config = ReservoirConfig(units, radius / alpha, scaling, density, k_values[-1],
                                     derive_seed(master_seed, 0, split_id, rep))
            reservoir = init_reservoir(config, data.feature_dim)
            for k, states in enumerate(iterate_states(reservoir, graph, data.features,
                                                      k_values[-1]), start=1):
                if k in wanted:
                    readout = fit_ridge(states, data.labels, split.train, lam, data.num_classes)
                    totals[k].append(accuracy(predict(readout, states), data.labels, split.test))
    return [{"K": k, "test_accuracy": float(np.mean(totals[k])), "ecd": paths.ecd(k - 1)}
            for k in k_values]


def radius_scaling_heatmap(graph: Graph, data: NodeData, splits: Sequence[Split], units: int,
                           radius_list: Sequence[float], scaling_list: Sequence[float],
                           lam: float, iterations: int | str = 100, seeds: int = 1,
                           master_seed: int = 0, density: float | None = None,
                           workers: int = 1) -> list[dict]:
    """Mean test accuracy for every (radius, scaling) cell, other
    hyperparameters fixed."""
    grid = GridSpec((units,), tuple(radius_list), tuple(scaling_list), (lam,), iterations,
                    seeds, None, density)
    result = grid_search(grid, graph, data, splits, master_seed, workers)
    cells = {}
    for r in result.runs:
        if r.status == "ok":
            cells.setdefault((r.radius, r.scaling), []).append(r.test_accuracy)
    return [{"radius": rho, "scaling": s,
             "test_accuracy": float(np.mean(cells[(rho, s)])) if (rho, s) in cells else float("nan")}
            for rho in radius_list for s in scaling_list]


def node_distance(graph: Graph, v: int, u: int) -> float:
    """Shortest-path length between two nodes (inf if unreachable)."""
    d = csgraph.shortest_path(graph.adjacency, method="D", directed=False, unweighted=True,
                              indices=[v])
    return float(d[0, u])


def sensitivity_table(reservoir: Reservoir, graph: Graph, iterations: int,
                      pairs: Sequence[tuple[int, int]]) -> list[dict]:
    """Distance, bound and per-path-length terms for each (v, u) pair."""
    rows = []
    for v, u in pairs:
        terms = sensitivity_terms(reservoir, graph, iterations, v, u)
        rows.append({"v": v, "u": u, "distance": node_distance(graph, v, u),
                     "bound": float(terms.sum()), "terms": terms.tolist()})
    return rows
