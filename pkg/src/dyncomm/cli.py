"""Command line driver.

Subcommands: generate, cluster, resolve, evaluate, flow, run.
Exit codes: 0 success, 1 usage, 2 data error, 3 internal.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import flow as flowmod
from . import snapio
from .core import DataError, DynamicGraph, TimeSegmentation, slice_graph
from .generator import ModelError, build_split_merge_model, build_static_model, \
    sample_segment
from .harness import ConfigError, ExperimentConfig, derive_seed, \
    run_experiment, run_segment_pipeline
from .mcmc import ClustererConfig, ClusteringError
from .metrics import aggregate, pair_confusion, precision, recall, \
    write_metrics_csv
from .resolver import ResolutionError, resolve, smoothing_context

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def _parser():
    p = argparse.ArgumentParser(
        prog="dyncomm",
        description="Dynamic community detection via ensembles of MCMC "
                    "clusterings.")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a dynamic block-model dataset")
    gen.add_argument("--model", choices=["split-merge", "static"],
                     default="split-merge")
    gen.add_argument("--segments", type=int, default=10)
    gen.add_argument("--edges-per-segment", type=int, default=2000)
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--out", required=True, help="output prefix")

    clu = sub.add_parser("cluster", help="cluster a SNAP edge list per segment")
    clu.add_argument("--edges", required=True, help="SNAP edge list path")
    clu.add_argument("--start", type=float, default=None,
                     help="segmentation start (default: first timestamp)")
    clu.add_argument("--width", type=float, required=True)
    clu.add_argument("--segments", type=int, required=True)
    clu.add_argument("--ensemble-size", type=int, default=10)
    clu.add_argument("--sweeps", type=int, default=100)
    clu.add_argument("--b-max", type=int, default=20)
    clu.add_argument("--seed", type=int, default=1)
    clu.add_argument("--workers", type=int, default=0)
    clu.add_argument("--out", required=True, help="clouds JSON path")

    res = sub.add_parser("resolve", help="resolve clouds into representatives")
    res.add_argument("--clouds", required=True)
    res.add_argument("--smoothing", type=int, default=0,
                     help="smoothing window radius (0 = memoryless)")
    res.add_argument("--out", required=True, help="partitions JSON path")

    ev = sub.add_parser("evaluate", help="score partitions against ground truth")
    ev.add_argument("--partitions", required=True)
    ev.add_argument("--truth", required=True, nargs="+",
                    help="one NODE BLOCK file per segment")
    ev.add_argument("--method", default="method")
    ev.add_argument("--out", required=True, help="metrics CSV path")

    fl = sub.add_parser("flow", help="emit the community-evolution flow graph")
    fl.add_argument("--partitions", required=True)
    fl.add_argument("--min-overlap", type=int, default=1)
    fl.add_argument("--dot", required=True)
    fl.add_argument("--json", dest="json_out", required=True)

    run = sub.add_parser("run", help="run a full experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--output-dir", default=None)
    return p


def _cmd_generate(args):
    if args.model == "split-merge":
        model = build_split_merge_model(n_segments=args.segments)
    else:
        model = build_static_model([62, 62, 62, 62, 63, 63, 63, 63])
    edges = []
    for s in range(args.segments):
        g = sample_segment(model, s, args.edges_per_segment,
                           derive_seed(args.seed, 0, 0, s, 0))
        for u, v, w in zip(g.src, g.dst, g.weight):
            edges.extend([(int(u), int(v), float(s))] * int(w))
    graph = DynamicGraph.from_edges(model.n_nodes, edges)
    snapio.write_snap(graph, args.out + ".edges.txt")
    with open(args.out + ".schedule.json", "w") as fh:
        fh.write(snapio.schedule_to_json(model))
    snapio.write_ground_truth(model, args.out + ".truth")
    print(f"wrote {graph.n_edges} edges over {args.segments} segments "
          f"to {args.out}.edges.txt")


def _cmd_cluster(args):
    graph = snapio.ingest_snap(args.edges)
    start = float(graph.t.min()) if args.start is None else args.start
    seg = TimeSegmentation(start, args.width, args.segments)
    segments = slice_graph(graph, seg)
    cfg = ClustererConfig(sweeps=args.sweeps, b_max=args.b_max)
    clouds = []
    for s, g in enumerate(segments):
        seeds = [derive_seed(args.seed, 1, 0, s, k)
                 for k in range(args.ensemble_size)]
        clouds.append(run_segment_pipeline(g, args.ensemble_size, cfg, seeds,
                                           args.workers))
    with open(args.out, "w") as fh:
        fh.write(snapio.clouds_to_json(clouds))
    print(f"wrote {len(clouds)} clouds to {args.out}")


def _cmd_resolve(args):
    with open(args.clouds) as fh:
        clouds = snapio.clouds_from_json(fh.read())
    reps = []
    for s, cloud in enumerate(clouds):
        ctx = smoothing_context(clouds, s, args.smoothing) \
            if args.smoothing > 0 else None
        reps.append(resolve(cloud, ctx))
    with open(args.out, "w") as fh:
        fh.write(snapio.partitions_to_json(reps))
    print(f"wrote {len(reps)} representative partitions to {args.out}")


def _cmd_evaluate(args):
    with open(args.partitions) as fh:
        reps = snapio.partitions_from_json(fh.read())
    truths = [snapio.read_ground_truth(p) for p in args.truth]
    if len(truths) != len(reps):
        raise DataError(f"{len(reps)} partitions but {len(truths)} truth files")
    rows = []
    for metric, fn in (("blocks", lambda p, t: p.n_blocks),
                       ("precision",
                        lambda p, t: precision(pair_confusion(p, t))),
                       ("recall", lambda p, t: recall(pair_confusion(p, t)))):
        series = aggregate([[fn(p, t) for p, t in zip(reps, truths)]])
        for s, st in enumerate(series.per_segment):
            rows.append((s, args.method, metric, st))
    rows.sort(key=lambda r: (r[0], r[2]))
    write_metrics_csv(args.out, rows)
    print(f"wrote metrics for {len(reps)} segments to {args.out}")


def _cmd_flow(args):
    with open(args.partitions) as fh:
        reps = snapio.partitions_from_json(fh.read())
    fg = flowmod.build_flow(reps, args.min_overlap)
    with open(args.dot, "w") as fh:
        fh.write(flowmod.emit_dot(fg))
    with open(args.json_out, "w") as fh:
        fh.write(flowmod.emit_json(fg))
    print(f"wrote flow graph ({len(fg.nodes)} nodes, {len(fg.edges)} edges)")


def _cmd_run(args):
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    cfg = ExperimentConfig.from_json(args.config, overrides)
    out_dir = run_experiment(cfg)
    print(f"experiment {cfg.name!r} complete: {out_dir}")


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handlers = {"generate": _cmd_generate, "cluster": _cmd_cluster,
                "resolve": _cmd_resolve, "evaluate": _cmd_evaluate,
                "flow": _cmd_flow, "run": _cmd_run}
    try:
        handlers[args.command](args)
        return EXIT_OK
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelError, ClusteringError, ResolutionError,
            OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
