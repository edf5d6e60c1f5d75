"""Grid-search model selection with seed/split averaging.

Reservoir radii in a grid are multiples of ``1/alpha`` where ``alpha`` is
the spectral radius of the task graph. For every split, each configuration
is scored by validation accuracy averaged over ``seeds_per_config``
reservoir draws; the best one (first in grid order on ties) is reported
with its seed-averaged test accuracy.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .graph import Graph, NodeData, Split, shortest_path_distribution, spectral_radius
from .readout import accuracy, fit_ridge, predict
from .reservoir import ReservoirConfig, compute_embeddings, init_reservoir

__all__ = [
    "GridSpec",
    "RunRecord",
    "ExperimentResult",
    "derive_seed",
    "resolve_iterations",
    "auto_iterations",
    "grid_search",
    "replace_features_constant",
    "DEFAULT_SCALINGS",
]

logger = logging.getLogger(__name__)

# Powers of 1/2 from 1 down to roughly 1/320.
DEFAULT_SCALINGS = tuple(0.5 ** k for k in range(9))


@dataclass(frozen=True)
class GridSpec:
    units_list: tuple[int, ...]
    radius_list: tuple[float, ...]
    scaling_list: tuple[float, ...]
    lambda_list: tuple[float, ...]
    iterations: int | str = 100
    seeds_per_config: int = 10
    split_ids: tuple[int, ...] | None = None
    density: float | None = None

    def __post_init__(self):
        for name in ("units_list", "radius_list", "scaling_list", "lambda_list"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, values)
        if any(r <= 0 for r in self.radius_list):
            raise ValueError("radii must be positive")
        if any(s <= 0 for s in self.scaling_list):
            raise ValueError("input scalings must be positive")
        if any(lam < 0 for lam in self.lambda_list):
            raise ValueError("regularization values must be >= 0")
        if self.seeds_per_config < 1:
            raise ValueError("seeds_per_config must be >= 1")
        if self.split_ids is not None:
            object.__setattr__(self, "split_ids", tuple(self.split_ids))
        if not (self.iterations == "auto" or (isinstance(self.iterations, int) and self.iterations >= 1)):
            raise ValueError("iterations must be a positive int or 'auto'")

    def reservoir_points(self) -> list[tuple[int, float, float]]:
        """(units, radius multiple, input scaling) in deterministic grid order."""
        return list(itertools.product(self.units_list, self.radius_list, self.scaling_list))

    def configs(self) -> list[tuple[int, float, float, float]]:
        """Full configurations; regularization varies fastest."""
        return [p + (lam,) for p in self.reservoir_points() for lam in self.lambda_list]


def derive_seed(master_seed: int, point: int, split: int, repetition: int) -> int:
    """Counter-based seed for one reservoir draw.

    ``SeedSequence(master_seed, spawn_key=(point, split, repetition))``
    reduced to a 32-bit integer: a run's seed depends only on its own
    coordinates, never on execution order.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(point, split, repetition))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def auto_iterations(graph: Graph) -> int:
    """95th percentile of the shortest-path length distribution, plus one."""
    return shortest_path_distribution(graph).percentile(95) + 1


def resolve_iterations(iterations: int | str, graph: Graph) -> int:
    return auto_iterations(graph) if iterations == "auto" else int(iterations)


def replace_features_constant(node_data: NodeData) -> NodeData:
    """Copy of ``node_data`` whose features are a single all-ones column."""
    return node_data.with_features(np.ones((node_data.num_nodes, 1)))


@dataclass(frozen=True)
class RunRecord:
    split: int
    repetition: int
    seed: int
    units: int
    radius: float
    scaling: float
    lam: float
    train_accuracy: float = math.nan
    val_accuracy: float = math.nan
    test_accuracy: float = math.nan
    embed_seconds: float = math.nan
    fit_seconds: float = math.nan
    status: str = "ok"
    error: str = ""

    @property
    def config(self) -> tuple[int, float, float, float]:
        return (self.units, self.radius, self.scaling, self.lam)


CSV_FIELDS = [f for f in RunRecord.__dataclass_fields__]


@dataclass
class SplitSelection:
    split: int
    units: int
    radius: float
    scaling: float
    lam: float
    val_accuracy_mean: float
    test_accuracy_mean: float
    test_accuracy_std: float
    num_runs: int


@dataclass
class ExperimentResult:
    runs: list[RunRecord]
    selections: list[SplitSelection]
    alpha: float
    iterations: int
    master_seed: int
    grid: GridSpec
    test_accuracy_mean: float = field(init=False)
    test_accuracy_std: float = field(init=False)

    def __post_init__(self):
        tests = [s.test_accuracy_mean for s in self.selections]
        self.test_accuracy_mean = float(np.mean(tests)) if tests else math.nan
        self.test_accuracy_std = float(np.std(tests)) if tests else math.nan

    @property
    def failed_runs(self) -> list[RunRecord]:
        return [r for r in self.runs if r.status != "ok"]

    def summary(self) -> dict:
        """Deterministic summary; contains no wall-clock quantities."""
        return {
            "alpha": self.alpha,
            "iterations": self.iterations,
            "master_seed": self.master_seed,
            "grid": {k: (list(v) if isinstance(v, tuple) else v)
                     for k, v in asdict(self.grid).items()},
            "selected": [asdict(s) for s in self.selections],
            "test_accuracy_mean": self.test_accuracy_mean,
            "test_accuracy_std": self.test_accuracy_std,
            "num_runs": len(self.runs),
            "failed_runs": [{"split": r.split, "repetition": r.repetition,
                             "config": list(r.config), "error": r.error}
                            for r in self.failed_runs],
        }

    def write_summary(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.summary(), f, indent=2, sort_keys=True)
            f.write("\n")

    def write_runs_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_FIELDS)
            for r in self.runs:
                writer.writerow([_fmt(getattr(r, name)) for name in CSV_FIELDS])


def _fmt(value):
    return repr(value) if isinstance(value, float) else value


# Per-process task context, installed once per worker.
_CONTEXT: dict = {}


def _install_context(context: dict) -> None:
    _CONTEXT.clear()
    _CONTEXT.update(context)


def _run_point(task: tuple[int, int, int]) -> list[RunRecord]:
    """Embed once for one reservoir draw and fit every regularization value."""
    split_id, point_idx, rep = task
    ctx = _CONTEXT
    grid: GridSpec = ctx["grid"]
    units, radius, scaling = grid.reservoir_points()[point_idx]
    seed = derive_seed(ctx["master_seed"], point_idx, split_id, rep)
    base = dict(split=split_id, repetition=rep, seed=seed, units=units, radius=radius,
                scaling=scaling)
    data: NodeData = ctx["data"]
    split: Split = ctx["splits"][split_id]
    try:
        t0 = time.perf_counter()
        config = ReservoirConfig(units, radius / ctx["alpha"], scaling, grid.density,
                                 ctx["iterations"], seed)
        reservoir = init_reservoir(config, data.feature_dim)
        emb = compute_embeddings(reservoir, ctx["graph"], data.features)
        embed_seconds = time.perf_counter() - t0
    except Exception as exc:  # recorded, excluded from means
        return [RunRecord(**base, lam=lam, status="failed", error=f"{type(exc).__name__}: {exc}")
                for lam in grid.lambda_list]
    records = []
    for lam in grid.lambda_list:
        try:
            t0 = time.perf_counter()
            readout = fit_ridge(emb, data.labels, split.train, lam, data.num_classes)
            pred = predict(readout, emb)
            fit_seconds = time.perf_counter() - t0
            records.append(RunRecord(
                **base, lam=lam,
                train_accuracy=accuracy(pred, data.labels, split.train),
                val_accuracy=accuracy(pred, data.labels, split.val),
                test_accuracy=accuracy(pred, data.labels, split.test),
                embed_seconds=embed_seconds, fit_seconds=fit_seconds))
        except Exception as exc:
            records.append(RunRecord(**base, lam=lam, status="failed",
                                     error=f"{type(exc).__name__}: {exc}"))
    return records


def _select(grid: GridSpec, split_id: int, runs: Sequence[RunRecord]) -> SplitSelection | None:
    by_config: dict[tuple, list[RunRecord]] = {}
    for r in runs:
        if r.split == split_id and r.status == "ok":
            by_config.setdefault(r.config, []).append(r)
    best = None
    for config in grid.configs():
        group = by_config.get(config)
        if not group:
            continue
        val = float(np.mean([r.val_accuracy for r in group]))
        # Strict comparison keeps the first config in grid order on ties.
        if best is None or val > best[0]:
            best = (val, config, group)
    if best is None:
        return None
    val, (units, radius, scaling, lam), group = best
    tests = [r.test_accuracy for r in group]
    return SplitSelection(split_id, units, radius, scaling, lam, val, float(np.mean(tests)),
                          float(np.std(tests)), len(group))


def grid_search(grid: GridSpec, graph: Graph, node_data: NodeData, splits: Sequence[Split],
                master_seed: int = 0, workers: int = 1) -> ExperimentResult:
    """Run every (split, configuration, seed) and select per split.

    Embeddings depend on (units, radius, scaling, seed) only and are reused
    across the regularization sub-grid. Results are independent of
    ``workers``.
    """
    if not splits:
        raise ValueError("grid search needs at least one split")
    split_ids = grid.split_ids if grid.split_ids is not None else tuple(range(len(splits)))
    for s in split_ids:
        if not 0 <= s < len(splits):
            raise ValueError(f"split id {s} out of range")
    alpha = spectral_radius(graph)
    if not alpha.converged:
        logger.warning("graph spectral radius estimate did not converge")
    if alpha.value <= 0:
        raise ValueError("graph has zero spectral radius; radii relative to 1/alpha are undefined")
    iterations = resolve_iterations(grid.iterations, graph)
    context = dict(grid=grid, graph=graph, data=node_data, splits=list(splits),
                   alpha=alpha.value, iterations=iterations, master_seed=master_seed)
    tasks = [(s, p, rep) for s in split_ids for p in range(len(grid.reservoir_points()))
             for rep in range(grid.seeds_per_config)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_install_context,
                                 initargs=(context,)) as pool:
            batches = list(pool.map(_run_point, tasks))
    else:
        _install_context(context)
        batches = [_run_point(t) for t in tasks]
    runs = [r for batch in batches for r in batch]
    selections = [sel for s in split_ids if (sel := _select(grid, s, runs)) is not None]
    return ExperimentResult(runs, selections, alpha.value, iterations, master_seed, grid)
