"""Command-line entry point: ``gesn <subcommand> ...``.

Every subcommand writes ``manifest.json`` into its output directory. The
manifest's ``argv`` lists every option explicitly, so ``gesn *argv``
reproduces the run.

Exit codes: 0 success, 2 invalid flags, 3 dataset load error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import DatasetError, SbmSpec, dataset_stats, generate_sbm, load_dataset, sbm_splits, write_dataset
from .experiments import iteration_curve, radius_scaling_heatmap, sensitivity_table, train_once
from .graph import GraphError, shortest_path_distribution, spectral_radius
from .readout import ReadoutError
from .reservoir import ReservoirConfig, ReservoirError, init_reservoir
from .selection import DEFAULT_SCALINGS, GridSpec, grid_search, replace_features_constant, resolve_iterations

logger = logging.getLogger("gesn")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOAD = 3
EXIT_NUMERIC = 4

OUTPUT_ENV = "GESN_OUTPUT_DIR"


class LoadError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _iterations(text: str) -> int | str:
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("iterations must be a positive integer or 'auto'")
    if value < 1:
        raise argparse.ArgumentTypeError("iterations must be >= 1")
    return value


def _pairs(text: str) -> tuple[tuple[int, int], ...]:
    try:
        return tuple((int(a), int(b)) for a, b in (p.split(":") for p in text.split(",")))
    except ValueError:
        raise argparse.ArgumentTypeError("pairs must look like 'v:u,v:u'")


def _emit(value) -> str:
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{a}:{b}" for a, b in value)
        return ",".join(_emit(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _add_output(p):
    p.add_argument("--output-dir", default=os.environ.get(OUTPUT_ENV, "gesn-output"),
                   help=f"output directory (default: ${OUTPUT_ENV} or ./gesn-output)")


def _add_dataset(p):
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--directed", action="store_true", help="keep edge direction as given")
    p.add_argument("--constant-features", action="store_true",
                   help="replace node features with a constant column")


def _add_reservoir(p, single: bool = True):
    p.add_argument("--density", type=float, default=None,
                   help="recurrent density (default min(1, 10/units))")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    if single:
        p.add_argument("--units", type=int, default=256)
        p.add_argument("--radius", type=float, default=1.0, help="multiple of 1/alpha")
        p.add_argument("--scaling", type=float, default=1.0, help="input scaling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gesn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="graph statistics")
    _add_dataset(p)
    _add_output(p)

    p = sub.add_parser("train", help="one embedding + readout run")
    _add_dataset(p)
    _add_reservoir(p)
    p.add_argument("--lam", type=float, default=1e-3, help="ridge regularization")
    p.add_argument("--iterations", type=_iterations, default=100)
    p.add_argument("--split", type=int, default=0)
    _add_output(p)

    p = sub.add_parser("gridsearch", help="model selection over a hyperparameter grid")
    _add_dataset(p)
    _add_reservoir(p, single=False)
    p.add_argument("--units", type=_ints, default=(16, 64, 256))
    p.add_argument("--radii", type=_floats, default=(0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0))
    p.add_argument("--scalings", type=_floats, default=DEFAULT_SCALINGS)
    p.add_argument("--lambdas", type=_floats, default=(1e-5, 1e-3, 1e-1, 1e1, 1e2))
    p.add_argument("--iterations", type=_iterations, default=100)
    p.add_argument("--seeds-per-config", type=int, default=10)
    p.add_argument("--splits", type=_ints, default=None, help="split ids (default: all)")
    p.add_argument("--workers", type=int, default=1)
    _add_output(p)

    p = sub.add_parser("curve-iterations", help="test accuracy against iterations K")
    _add_dataset(p)
    _add_reservoir(p)
    p.add_argument("--lam", type=float, default=1e-3)
    p.add_argument("--k-values", type=_ints, default=tuple(range(1, 21)))
    p.add_argument("--seeds", type=int, default=10)
    _add_output(p)

    p = sub.add_parser("heatmap", help="test accuracy over radius x input scaling")
    _add_dataset(p)
    _add_reservoir(p, single=False)
    p.add_argument("--units", type=int, default=256)
    p.add_argument("--radii", type=_floats, default=(0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0))
    p.add_argument("--scalings", type=_floats, default=DEFAULT_SCALINGS)
    p.add_argument("--lam", type=float, default=1e-3)
    p.add_argument("--iterations", type=_iterations, default=100)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    _add_output(p)

    p = sub.add_parser("sensitivity", help="input-sensitivity bound per node pair")
    _add_dataset(p)
    _add_reservoir(p)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--pairs", type=_pairs, required=True, help="node pairs 'v:u,v:u'")
    _add_output(p)

    p = sub.add_parser("synth", help="write a synthetic SBM dataset")
    p.add_argument("output", help="dataset directory to create")
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.02)
    p.add_argument("--p-out", type=float, default=0.1)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--feature-signal", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-splits", type=int, default=10)
    return parser


def resolved_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> list[str]:
    """Every option of the chosen subcommand spelled out explicitly."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    argv = [args.command]
    for action in subparser._actions:
        if isinstance(action, argparse._HelpAction):
            continue
        value = getattr(args, action.dest)
        if not action.option_strings:
            argv.append(str(value))
        elif isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(action.option_strings[0])
        elif value is not None:
            argv += [action.option_strings[0], _emit(value)]
    return argv


def _write_manifest(out: Path, parser, args) -> None:
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items()}
    manifest = {"version": __version__, "command": args.command,
                "argv": resolved_argv(parser, args), "config": config}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _load(args):
    try:
        graph, data, splits = load_dataset(args.dataset, directed=args.directed)
    except (DatasetError, GraphError, OSError) as exc:
        raise LoadError(str(exc)) from exc
    if args.constant_features:
        data = replace_features_constant(data)
    return graph, data, splits


def _need_splits(splits, args):
    if not splits:
        raise LoadError(f"{args.dataset}: no split_<k>.json files")
    return splits


def cmd_stats(args, out: Path) -> dict:
    graph, data, _ = _load(args)
    stats = dataset_stats(graph, data)
    paths = shortest_path_distribution(graph)
    reachable = paths.num_reachable_pairs > 0
    stats["shortest_path_percentiles"] = {
        str(p): (paths.percentile(p) if reachable else None) for p in (50, 95, 100)}
    stats["unreachable_pairs"] = paths.num_unreachable_pairs
    _write_json(out / "stats.json", stats)
    print(json.dumps(stats, indent=2, sort_keys=True))
    return stats


def _single_config(args, graph, iterations):
    alpha = spectral_radius(graph).value
    if alpha <= 0:
        raise ReservoirError("graph has no edges; radius multiples of 1/alpha are undefined")
    return ReservoirConfig(args.units, args.radius / alpha, args.scaling, args.density,
                           iterations, args.seed)


def cmd_train(args, out: Path) -> dict:
    graph, data, splits = _load(args)
    splits = _need_splits(splits, args)
    if not 0 <= args.split < len(splits):
        raise LoadError(f"split {args.split} not found ({len(splits)} splits)")
    config = _single_config(args, graph, resolve_iterations(args.iterations, graph))
    result = train_once(graph, data, splits[args.split], config, args.lam)
    _write_csv(out / "predictions.csv", ["node", "prediction", "label"],
               zip(range(graph.num_nodes), result.predictions.tolist(), data.labels.tolist()))
    _write_json(out / "metrics.json", result.metrics)
    _write_json(out / "timings.json", result.timings)
    print(json.dumps(result.metrics, indent=2, sort_keys=True))
    return result.metrics


def cmd_gridsearch(args, out: Path) -> dict:
    graph, data, splits = _load(args)
    splits = _need_splits(splits, args)
    grid = GridSpec(args.units, args.radii, args.scalings, args.lambdas, args.iterations,
                    args.seeds_per_config, args.splits, args.density)
    result = grid_search(grid, graph, data, splits, args.seed, args.workers)
    result.write_runs_csv(out / "runs.csv")
    result.write_summary(out / "summary.json")
    summary = result.summary()
    print(f"test accuracy {summary['test_accuracy_mean']:.4f} +- "
          f"{summary['test_accuracy_std']:.4f} over {len(summary['selected'])} splits; "
          f"{len(summary['failed_runs'])} failed runs")
    return summary


def cmd_curve_iterations(args, out: Path) -> list:
    graph, data, splits = _load(args)
    splits = _need_splits(splits, args)
    rows = iteration_curve(graph, data, splits, args.units, args.radius, args.scaling, args.lam,
                           args.k_values, args.seeds, args.seed, args.density)
    _write_csv(out / "curve.csv", ["K", "test_accuracy", "ecd"],
               ([r["K"], r["test_accuracy"], r["ecd"]] for r in rows))
    return rows


def cmd_heatmap(args, out: Path) -> list:
    graph, data, splits = _load(args)
    splits = _need_splits(splits, args)
    rows = radius_scaling_heatmap(graph, data, splits, args.units, args.radii, args.scalings,
                                  args.lam, args.iterations, args.seeds, args.seed,
                                  args.density, args.workers)
    _write_csv(out / "heatmap.csv", ["radius", "scaling", "test_accuracy"],
               ([r["radius"], r["scaling"], r["test_accuracy"]] for r in rows))
    return rows


def cmd_sensitivity(args, out: Path) -> list:
    graph, data, _ = _load(args)
    for v, u in args.pairs:
        if not (0 <= v < graph.num_nodes and 0 <= u < graph.num_nodes):
            raise argparse.ArgumentTypeError(f"node pair {v}:{u} out of range [0, {graph.num_nodes})")
    config = _single_config(args, graph, args.iterations)
    reservoir = init_reservoir(config, data.feature_dim)
    rows = sensitivity_table(reservoir, graph, args.iterations, args.pairs)
    header = ["v", "u", "distance", "bound"] + [f"term_{ell}" for ell in range(args.iterations)]
    _write_csv(out / "sensitivity.csv", header,
               ([r["v"], r["u"], r["distance"], r["bound"], *r["terms"]] for r in rows))
    return rows


def cmd_synth(args, out: Path) -> dict:
    spec = SbmSpec(args.nodes, args.classes, args.p_in, args.p_out, args.feature_dim,
                   args.feature_signal, args.seed)
    graph, data = generate_sbm(spec)
    write_dataset(out, graph, data, sbm_splits(spec, args.num_splits))
    stats = dataset_stats(graph, data)
    print(json.dumps(stats, indent=2, sort_keys=True))
    return stats


COMMANDS = {
    "stats": cmd_stats,
    "train": cmd_train,
    "gridsearch": cmd_gridsearch,
    "curve-iterations": cmd_curve_iterations,
    "heatmap": cmd_heatmap,
    "sensitivity": cmd_sensitivity,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.output if args.command == "synth" else args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(out, parser, args)
        COMMANDS[args.command](args, out)
    except LoadError as exc:
        print(f"gesn: load error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except argparse.ArgumentTypeError as exc:
        print(f"gesn: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReservoirError, ReadoutError, GraphError, ValueError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"gesn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
