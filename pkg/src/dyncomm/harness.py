"""End-to-end experiment driver: generation, parallel ensembles, metrics, flow.

Reproduces three experiment families: emerging edges on a static model,
the synthetic split/merge schedule, and semi-synthetic injection into a
real temporal edge list, plus a plain real-data run.  All randomness is
derived from one master seed; outputs are byte-stable.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import flow as flowmod
from . import snapio
from .core import DataError, DynamicGraph, Partition, SegmentGraph, \
    TimeSegmentation, slice_graph
from .generator import BlockModelSchedule, build_split_merge_model, \
    build_static_model, inject, pairs_to_segment, sample_edge_sequence, \
    sample_segment, transition_segments
from .mcmc import ClustererConfig, cluster
from .metrics import aggregate, pair_confusion, precision, recall, \
    write_metrics_csv
from .resolver import PartitionCloud, resolve, smoothing_context

WEEK_SECONDS = 7 * 24 * 3600

MODES = ("emerging", "synthetic-dynamic", "semi-synthetic", "real")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    name: str = "experiment"
    output_dir: str = "out"
    master_seed: int = 1
    ensemble_size: int = 10
    repetitions: int = 10
    smoothing_radius: int = 1
    workers: int = 0  # 0 = available parallelism
    exclude_noise: bool = False
    dataset: str = ""  # SNAP edge list (semi-synthetic and real modes)

    # clusterer settings
    sweeps: int = 100
    beta: float = 1.0
    b_min: int = 1
    b_max: int = 20
    anneal: bool = True
    epsilon: float = 0.1

    # emerging mode
    n_nodes: int = 500
    n_blocks: int = 8
    external_internal_ratio: float = 0.2
    budget_min: int = 1000
    budget_max: int = 1900
    budget_step: int = 100

    # dynamic modes
    n_segments: int = 10
    edges_per_segment: int = 2000
    injected_budget: int = 960
    cross_fraction: float = 160.0 / 960.0
    noise_rate: float = -1.0  # <0: use the calibrated external level

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.ensemble_size < 2:
            raise ConfigError("ensemble_size must be >= 2")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.mode in ("semi-synthetic", "real"):
            if not self.dataset:
                raise ConfigError(f"mode {self.mode} requires a dataset path")
            if not os.path.exists(self.dataset):
                raise ConfigError(f"dataset not found: {self.dataset}")

    @classmethod
    def from_json(cls, path, overrides=None):
        with open(path) as fh:
            doc = json.load(fh)
        doc.update(overrides or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def budgets(self):
        return list(range(self.budget_min, self.budget_max + 1,
                          self.budget_step))

    def clusterer(self, rng_seed: int) -> ClustererConfig:
        return ClustererConfig(sweeps=self.sweeps, beta=self.beta,
                               b_min=self.b_min, b_max=self.b_max,
                               anneal=self.anneal, epsilon=self.epsilon,
                               rng_seed=rng_seed)

    def n_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


# seed-derivation tags; documented fixed mixing via SeedSequence spawn keys
_TAG_GENERATE = 0
_TAG_CLUSTER = 1
_TAG_INJECT = 2


def derive_seed(master_seed: int, tag: int, repetition: int, segment: int,
                member: int) -> int:
    """Stable per-(tag, repetition, segment, member) seed from the master seed."""
    ss = np.random.SeedSequence(master_seed,
                                spawn_key=(tag, repetition, segment, member))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_segment_pipeline(g: SegmentGraph, k: int, cfg, seeds,
                         workers: int = 0) -> PartitionCloud:
    """K independent clusterer runs over one segment, concurrently.

    cfg may be a ClustererConfig template (rng_seed replaced per member) or
    an ExperimentConfig.  Cloud order follows seed order regardless of
    completion order.
    """
    seeds = list(seeds)
    if len(seeds) != k:
        raise ConfigError(f"need exactly {k} seeds, got {len(seeds)}")
    if isinstance(cfg, ExperimentConfig):
        make = cfg.clusterer
        workers = workers or cfg.n_workers()
    else:
        make = lambda s: dataclasses.replace(cfg, rng_seed=s)
        workers = workers or (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(lambda s: cluster(g, make(s)), seeds))
    return PartitionCloud(g.segment_index, tuple(parts))


def _metric_values(pred: Partition, truth: Partition, scope=None):
    c = pair_confusion(pred, truth, scope)
    return {"precision": precision(c), "recall": recall(c),
            "blocks": pred.n_blocks}


def _cluster_many(tasks, workers):
    """tasks: list of (key, SegmentGraph, ClustererConfig); returns {key: Partition}."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = pool.map(lambda t: (t[0], cluster(t[1], t[2])), tasks)
        return dict(results)


def _write(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _emit_method(out_dir, method, rows, reps_partitions):
    mdir = os.path.join(out_dir, method)
    os.makedirs(mdir, exist_ok=True)
    write_metrics_csv(os.path.join(mdir, "metrics.csv"), rows)
    _write(os.path.join(mdir, "partitions.json"),
           snapio.partitions_to_json(reps_partitions))
    if len(reps_partitions) >= 2:
        fg = flowmod.build_flow(reps_partitions)
        _write(os.path.join(mdir, "flow.dot"), flowmod.emit_dot(fg))
        _write(os.path.join(mdir, "flow.json"), flowmod.emit_json(fg))


def _manifest(out_dir, cfg: ExperimentConfig, extra=None):
    doc = {"config": dataclasses.asdict(cfg), "seed_scheme":
           "SeedSequence(master, spawn_key=(tag, repetition, segment, member))",
           **(extra or {})}
    _write(os.path.join(out_dir, "manifest.json"),
           json.dumps(doc, sort_keys=True, indent=2) + "\n")


def run_experiment(cfg: ExperimentConfig) -> str:
    """Run one experiment end to end; returns the output directory.

    Partial outputs are removed when the run fails.
    """
    out_dir = os.path.join(cfg.output_dir, cfg.name)
    if os.path.exists(out_dir):
        shutil.rmtree(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    try:
        if cfg.mode == "emerging":
            _run_emerging(cfg, out_dir)
        elif cfg.mode == "synthetic-dynamic":
            _run_synthetic_dynamic(cfg, out_dir)
        elif cfg.mode == "semi-synthetic":
            _run_semi_synthetic(cfg, out_dir)
        else:
            _run_real(cfg, out_dir)
    except Exception:
        shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return out_dir


def _member_seeds(cfg, rep, segment):
    seeds = [derive_seed(cfg.master_seed, _TAG_CLUSTER, rep, segment, k)
             for k in range(cfg.ensemble_size)]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("derived seed collision")  # astronomically unlikely
    return seeds


def _balanced_sizes(n_nodes, n_blocks):
    base = n_nodes // n_blocks
    extra = n_nodes % n_blocks
    return [base] * (n_blocks - extra) + [base + 1] * extra


def _run_emerging(cfg: ExperimentConfig, out_dir):
    model = build_static_model(_balanced_sizes(cfg.n_nodes, cfg.n_blocks),
                               cfg.external_internal_ratio)
    truth = model.base_blocks
    budgets = cfg.budgets()
    max_budget = budgets[-1]

    tasks = []
    graphs = {}
    for rep in range(cfg.repetitions):
        src, dst = sample_edge_sequence(
            model, 0, max_budget,
            derive_seed(cfg.master_seed, _TAG_GENERATE, rep, 0, 0))
        for budget in budgets:
            g = pairs_to_segment(0, cfg.n_nodes, src[:budget], dst[:budget])
            graphs[(rep, budget)] = g
            for k, seed in enumerate(_member_seeds(cfg, rep, budget)):
                tasks.append(((rep, budget, k), g, cfg.clusterer(seed)))
    parts = _cluster_many(tasks, cfg.n_workers())

    per_method = {"baseline": [], "ensemble": []}
    rep_parts = {"baseline": [], "ensemble": []}
    for rep in range(cfg.repetitions):
        rows = {"baseline": [], "ensemble": []}
        for budget in budgets:
            cloud = PartitionCloud(
                0, tuple(parts[(rep, budget, k)]
                         for k in range(cfg.ensemble_size)))
            chosen = {"baseline": cloud.partitions[0],
                      "ensemble": resolve(cloud)}
            for method, p in chosen.items():
                rows[method].append(_metric_values(p, truth))
                if rep == 0:
                    rep_parts[method].append(p)
        for method in rows:
            per_method[method].append(rows[method])

    _manifest(out_dir, cfg, {"budgets": budgets})
    _write(os.path.join(out_dir, "schedule.json"),
           snapio.schedule_to_json(model))
    for method, reps in per_method.items():
        rows = []
        for metric in ("blocks", "precision", "recall"):
            series = aggregate([[rv[metric] for rv in rep] for rep in reps])
            for budget, st in zip(budgets, series.per_segment):
                rows.append((budget, method, metric, st))
        rows.sort(key=lambda r: (r[0], r[2]))
        _emit_method(out_dir, method, rows, [])
        _write(os.path.join(out_dir, method, "partitions.json"),
               snapio.partitions_to_json(rep_parts[method]))


def _scope_for(cfg, model, n_total=None, synth_offset=0):
    """Node scope for metrics; drops the noise block when configured."""
    scope = None
    if synth_offset or n_total:
        scope = set(range(synth_offset, synth_offset + model.n_nodes))
    if cfg.exclude_noise and model.events:
        truth = model.truth_at(0)
        noise_lab = int(truth.labels[-1])
        noise = {i + synth_offset for i, lab in enumerate(truth.labels)
                 if lab == noise_lab}
        base = scope if scope is not None else \
            set(range(model.n_nodes))
        scope = base - noise
    return scope


def _dynamic_common(cfg, out_dir, model, segments, truths, scope, methods):
    """Cluster/resolve/evaluate shared by the two dynamic experiment modes."""
    n_seg = len(segments[0])
    tasks = []
    for rep in range(cfg.repetitions):
        for s in range(n_seg):
            for k, seed in enumerate(_member_seeds(cfg, rep, s)):
                tasks.append(((rep, s, k), segments[rep][s],
                              cfg.clusterer(seed)))
    parts = _cluster_many(tasks, cfg.n_workers())

    per_method = {m: [] for m in methods}
    rep_parts = {m: [] for m in methods}
    for rep in range(cfg.repetitions):
        clouds = [PartitionCloud(s, tuple(parts[(rep, s, k)]
                                          for k in range(cfg.ensemble_size)))
                  for s in range(n_seg)]
        chosen = {}
        if "baseline" in methods:
            chosen["baseline"] = [c.partitions[0] for c in clouds]
        if "ensemble" in methods:
            chosen["ensemble"] = [resolve(c) for c in clouds]
        if "smoothed" in methods:
            chosen["smoothed"] = [
                resolve(clouds[s],
                        smoothing_context(clouds, s, cfg.smoothing_radius))
                for s in range(n_seg)]
        for method in methods:
            vals = [_metric_values(p, truths[s], scope)
                    for s, p in enumerate(chosen[method])]
            per_method[method].append(vals)
            if rep == 0:
                rep_parts[method] = chosen[method]

    for method in methods:
        rows = []
        for metric in ("blocks", "precision", "recall"):
            series = aggregate([[rv[metric] for rv in rep]
                                for rep in per_method[method]])
            for s, st in enumerate(series.per_segment):
                rows.append((s, method, metric, st))
        rows.sort(key=lambda r: (r[0], r[2]))
        _emit_method(out_dir, method, rows, rep_parts[method])
    return per_method


def _run_synthetic_dynamic(cfg: ExperimentConfig, out_dir):
    model = build_split_merge_model(
        n_segments=cfg.n_segments,
        external_internal_ratio=cfg.external_internal_ratio,
        noise_rate=None if cfg.noise_rate < 0 else cfg.noise_rate)
    segments = []
    for rep in range(cfg.repetitions):
        segments.append([
            sample_segment(model, s, cfg.edges_per_segment,
                           derive_seed(cfg.master_seed, _TAG_GENERATE,
                                       rep, s, 0))
            for s in range(cfg.n_segments)])
    truths = [model.truth_at(s) for s in range(cfg.n_segments)]
    scope = _scope_for(cfg, model)
    _manifest(out_dir, cfg,
              {"transition_segments": transition_segments(model)})
    _write(os.path.join(out_dir, "schedule.json"),
           snapio.schedule_to_json(model))
    _dynamic_common(cfg, out_dir, model, segments, truths, scope,
                    ("baseline", "ensemble", "smoothed"))


def ingest_snap(path, nodemap_path=None) -> DynamicGraph:
    return snapio.ingest_snap(path, nodemap_path)


def weekly_segmentation(graph: DynamicGraph, weeks: int) -> TimeSegmentation:
    """7-day windows starting at the first timestamp."""
    if graph.n_edges == 0:
        raise DataError("empty graph")
    return TimeSegmentation(float(graph.t.min()), float(WEEK_SECONDS), weeks)


def _first_weeks(graph: DynamicGraph, weeks: int):
    seg = weekly_segmentation(graph, weeks)
    keep = graph.t < seg.end
    return DynamicGraph(graph.node_count, graph.src[keep], graph.dst[keep],
                        graph.t[keep]), seg


def _run_semi_synthetic(cfg: ExperimentConfig, out_dir):
    real, seg = _first_weeks(ingest_snap(
        cfg.dataset, os.path.join(out_dir, "nodemap.json")), cfg.n_segments)
    model = build_split_merge_model(
        n_constant_blocks=0, n_noise=0, n_segments=cfg.n_segments,
        external_internal_ratio=cfg.external_internal_ratio)
    n_real = real.node_count

    segments = []
    for rep in range(cfg.repetitions):
        combined = inject(real, model, seg, cfg.injected_budget,
                          cfg.cross_fraction,
                          derive_seed(cfg.master_seed, _TAG_INJECT, rep, 0, 0))
        segments.append(slice_graph(combined, seg))

    # synthetic-node truth; real nodes share one throwaway label outside scope
    truths = []
    for s in range(cfg.n_segments):
        model_truth = model.truth_at(s)
        labels = np.concatenate([
            np.zeros(n_real, dtype=np.int64),
            model_truth.labels + 1])
        truths.append(Partition(labels))
    scope = set(range(n_real, n_real + model.n_nodes))

    _manifest(out_dir, cfg, {
        "real_nodes": n_real, "real_edges": real.n_edges,
        "transition_segments": transition_segments(model)})
    _write(os.path.join(out_dir, "schedule.json"),
           snapio.schedule_to_json(model))
    _dynamic_common(cfg, out_dir, model, segments, truths, scope,
                    ("baseline", "ensemble", "smoothed"))


def _run_real(cfg: ExperimentConfig, out_dir):
    graph, seg = _first_weeks(ingest_snap(
        cfg.dataset, os.path.join(out_dir, "nodemap.json")), cfg.n_segments)
    segments = slice_graph(graph, seg)

    tasks = []
    for s in range(seg.count):
        for k, seed in enumerate(_member_seeds(cfg, 0, s)):
            tasks.append(((s, k), segments[s], cfg.clusterer(seed)))
    parts = _cluster_many(tasks, cfg.n_workers())
    clouds = [PartitionCloud(s, tuple(parts[(s, k)]
                                      for k in range(cfg.ensemble_size)))
              for s in range(seg.count)]
    reps = [resolve(clouds[s],
                    smoothing_context(clouds, s, cfg.smoothing_radius))
            for s in range(seg.count)]

    _manifest(out_dir, cfg, {"nodes": graph.node_count,
                             "edges": graph.n_edges})
    mdir = os.path.join(out_dir, "smoothed")
    os.makedirs(mdir, exist_ok=True)
    _write(os.path.join(mdir, "partitions.json"),
           snapio.partitions_to_json(reps))
    fg = flowmod.build_flow(reps)
    _write(os.path.join(mdir, "flow.dot"), flowmod.emit_dot(fg))
    _write(os.path.join(mdir, "flow.json"), flowmod.emit_json(fg))
    rows = [(s, "smoothed", "blocks",
             aggregate([[p.n_blocks for p in reps]]).per_segment[s])
            for s in range(seg.count)]
    write_metrics_csv(os.path.join(mdir, "metrics.csv"), rows)
