"""Pairwise precision/recall against ground truth, plus multi-run aggregation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import DataError, Partition

UNDEFINED = None  # distinguished value for zero-denominator ratios


@dataclass(frozen=True)
class PairConfusion:
    """Co-clustering agreement counts over all unordered node pairs in scope."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def pair_confusion(predicted: Partition, truth: Partition,
                   scope=None) -> PairConfusion:
    """Confusion counts via the contingency table; O(N + table cells).

    scope restricts the counted pairs to a node subset (e.g. synthetic
    nodes only); both endpoints must lie in scope for a pair to count.
    """
    if predicted.n_nodes != truth.n_nodes:
        raise DataError("partitions must share the node universe")
    if scope is not None:
        scope = np.asarray(sorted(set(int(v) for v in scope)), dtype=np.int64)
        if scope.size and (scope.min() < 0 or scope.max() >= predicted.n_nodes):
            raise DataError("scope contains nodes outside the universe")
        if scope.size < 2:
            raise DataError("scope must contain at least two nodes")
        pred = predicted.labels[scope]
        true = truth.labels[scope]
    else:
        pred = predicted.labels
        true = truth.labels

    n = pred.size
    total_pairs = n * (n - 1) // 2

    def pairs_within(counts):
        c = counts.astype(np.int64)
        return int((c * (c - 1) // 2).sum())

    # contingency table over (predicted label, truth label)
    key = pred.astype(np.int64) * (true.max() + 1) + true
    cells = np.bincount(key)
    tp = pairs_within(cells)
    same_pred = pairs_within(np.bincount(pred))
    same_true = pairs_within(np.bincount(true))
    fp = same_pred - tp
    fn = same_true - tp
    tn = total_pairs - tp - fp - fn
    return PairConfusion(tp, fp, fn, tn)


def precision(c: PairConfusion):
    """tp / (tp + fp), or UNDEFINED when no pair is predicted co-clustered."""
    denom = c.tp + c.fp
    return UNDEFINED if denom == 0 else c.tp / denom


def recall(c: PairConfusion):
    """tp / (tp + fn), or UNDEFINED when truth has no co-clustered pair."""
    denom = c.tp + c.fn
    return UNDEFINED if denom == 0 else c.tp / denom


@dataclass(frozen=True)
class SegmentStat:
    mean: float  # nan when every run was undefined
    stderr: float
    n_defined: int
    n_undefined: int


@dataclass(frozen=True)
class MetricSeries:
    per_segment: tuple
    runs: int


def aggregate(runs) -> MetricSeries:
    """Per-segment mean and standard error over runs; undefined values excluded.

    runs: list (one entry per run) of equal-length per-segment value lists;
    entries may be UNDEFINED.
    """
    runs = [list(r) for r in runs]
    if not runs:
        raise DataError("need at least one run")
    n_seg = len(runs[0])
    if any(len(r) != n_seg for r in runs):
        raise DataError("runs must have equal segment counts")
    stats = []
    for s in range(n_seg):
        vals = [r[s] for r in runs if r[s] is not UNDEFINED]
        n_undef = len(runs) - len(vals)
        if not vals:
            stats.append(SegmentStat(math.nan, math.nan, 0, n_undef))
            continue
        mean = sum(vals) / len(vals)
        if len(vals) > 1:
            var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            stderr = math.sqrt(var) / math.sqrt(len(vals))
        else:
            stderr = 0.0
        stats.append(SegmentStat(mean, stderr, len(vals), n_undef))
    return MetricSeries(tuple(stats), len(runs))


def write_metrics_csv(path, rows):
    """rows: iterable of (x, method, metric, SegmentStat); stable formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "method", "metric", "mean", "stderr",
                    "n_defined", "n_undefined"])
        for x, method, metric, st in rows:
            mean = "" if math.isnan(st.mean) else f"{st.mean:.6f}"
            err = "" if math.isnan(st.stderr) else f"{st.stderr:.6f}"
            w.writerow([x, method, metric, mean, err,
                        st.n_defined, st.n_undefined])
