"""Shared domain types: dynamic graphs, time segments, partitions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Input data violates a structural contract (bad ids, timestamps, labels)."""


@dataclass(frozen=True)
class TimestampedEdge:
    src: int
    dst: int
    t: float


@dataclass(frozen=True)
class DynamicGraph:
    """Timestamped multigraph over dense integer node ids in [0, node_count).

    Repeated (src, dst, t) triples are permitted: edges are Poisson counts.
    Undirected; src/dst order carries no meaning.
    """

    node_count: int
    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        t = np.asarray(self.t, dtype=np.float64)
        if not (src.shape == dst.shape == t.shape) or src.ndim != 1:
            raise DataError("edge arrays must be 1-d and equally sized")
        if self.node_count < 0:
            raise DataError("node_count must be non-negative")
        if src.size and (src.min() < 0 or dst.min() < 0
                         or src.max() >= self.node_count
                         or dst.max() >= self.node_count):
            raise DataError("edge endpoint outside [0, node_count)")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "t", t)
        self.src.setflags(write=False)
        self.dst.setflags(write=False)
        self.t.setflags(write=False)

    @classmethod
    def from_edges(cls, node_count, edges):
        """Build from an iterable of (src, dst, t) triples."""
        edges = list(edges)
        if edges:
            src, dst, t = (np.array(col) for col in zip(*edges))
        else:
            src = dst = np.empty(0, dtype=np.int64)
            t = np.empty(0, dtype=np.float64)
        return cls(node_count, src, dst, t)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    def edges(self):
        return [TimestampedEdge(int(s), int(d), float(tt))
                for s, d, tt in zip(self.src, self.dst, self.t)]


@dataclass(frozen=True)
class TimeSegmentation:
    """Uniform non-overlapping segments s = [start + s*width, start + (s+1)*width)."""

    start: float
    width: float
    count: int

    def __post_init__(self):
        if self.width <= 0:
            raise DataError("segment width must be positive")
        if self.count < 1:
            raise DataError("segment count must be positive")

    @property
    def end(self) -> float:
        return self.start + self.width * self.count

    def segment_of(self, t: float) -> int:
        """Index of the segment containing timestamp t, or -1 if outside the span."""
        if t < self.start or t >= self.end:
            return -1
        return min(int((t - self.start) // self.width), self.count - 1)


@dataclass(frozen=True)
class SegmentGraph:
    """One time segment materialized as an undirected weighted multigraph.

    Each unordered pair is stored once with src <= dst; weight is the
    edge multiplicity within the segment.
    """

    segment_index: int
    node_count: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        weight = np.asarray(self.weight, dtype=np.int64)
        if not (src.shape == dst.shape == weight.shape) or src.ndim != 1:
            raise DataError("pair arrays must be 1-d and equally sized")
        if src.size:
            if src.min() < 0 or dst.max() >= self.node_count:
                raise DataError("pair endpoint outside [0, node_count)")
            if np.any(src > dst):
                raise DataError("pairs must satisfy src <= dst")
            if weight.min() < 1:
                raise DataError("multiplicities must be >= 1")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", weight)
        self.src.setflags(write=False)
        self.dst.setflags(write=False)
        self.weight.setflags(write=False)

    @classmethod
    def from_pairs(cls, segment_index, node_count, pairs, drop_self_loops=True):
        """Aggregate an iterable of (u, v) endpoint pairs into weighted form."""
        counts = {}
        for u, v in pairs:
            if u == v:
                if drop_self_loops:
                    continue
                raise DataError("self-loops are not supported")
            key = (u, v) if u <= v else (v, u)
            counts[key] = counts.get(key, 0) + 1
        return cls._from_counts(segment_index, node_count, counts)

    @classmethod
    def _from_counts(cls, segment_index, node_count, counts):
        keys = sorted(counts)
        src = np.array([k[0] for k in keys], dtype=np.int64)
        dst = np.array([k[1] for k in keys], dtype=np.int64)
        weight = np.array([counts[k] for k in keys], dtype=np.int64)
        return cls(segment_index, node_count, src, dst, weight)

    @property
    def total_weight(self) -> int:
        return int(self.weight.sum())

    @property
    def n_pairs(self) -> int:
        return int(self.src.size)

    def degrees(self) -> np.ndarray:
        """Weighted degree per node."""
        deg = np.zeros(self.node_count, dtype=np.int64)
        np.add.at(deg, self.src, self.weight)
        np.add.at(deg, self.dst, self.weight)
        return deg

    def pair_weights(self) -> dict:
        return {(int(u), int(v)): int(w)
                for u, v, w in zip(self.src, self.dst, self.weight)}


@dataclass(frozen=True)
class Partition:
    """Disjoint assignment of all N nodes to blocks labeled densely in [0, c)."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise DataError("labels must be a non-empty 1-d array")
        c = labels.max() + 1
        if labels.min() < 0 or len(np.unique(labels)) != c:
            raise DataError("block labels must be dense in [0, c)")
        object.__setattr__(self, "labels", labels)
        self.labels.setflags(write=False)

    @classmethod
    def densify(cls, raw_labels) -> "Partition":
        """Relabel arbitrary labels to dense [0, c) by order of first appearance."""
        raw = np.asarray(raw_labels)
        seen = {}
        dense = np.empty(raw.size, dtype=np.int64)
        for i, lab in enumerate(raw):
            key = lab.item() if hasattr(lab, "item") else lab
            if key not in seen:
                seen[key] = len(seen)
            dense[i] = seen[key]
        return cls(dense)

    @classmethod
    def from_blocks(cls, blocks, n_nodes=None) -> "Partition":
        """Build from an iterable of disjoint node sets covering [0, N)."""
        if n_nodes is None:
            n_nodes = sum(len(b) for b in blocks)
        labels = np.full(n_nodes, -1, dtype=np.int64)
        for lab, block in enumerate(blocks):
            for v in block:
                if labels[v] != -1:
                    raise DataError(f"node {v} appears in two blocks")
                labels[v] = lab
        if np.any(labels < 0):
            raise DataError("blocks do not cover all nodes")
        return cls(labels)

    @property
    def n_nodes(self) -> int:
        return int(self.labels.size)

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1

    def blocks(self):
        """Node sets per block, indexed by label."""
        out = [set() for _ in range(self.n_blocks)]
        for node, lab in enumerate(self.labels):
            out[lab].add(node)
        return out

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_blocks)

    def equivalent_to(self, other: "Partition") -> bool:
        """True when the two partitions agree up to block relabeling."""
        if self.n_nodes != other.n_nodes or self.n_blocks != other.n_blocks:
            return False
        fwd = {}
        for a, b in zip(self.labels, other.labels):
            if fwd.setdefault(int(a), int(b)) != int(b):
                return False
        return True


def blocks_of(p: Partition):
    """Disjoint node sets covering [0, N); set x holds the nodes labeled x."""
    return p.blocks()


def slice_graph(graph: DynamicGraph, seg: TimeSegmentation):
    """Bucket every edge into its segment; multiplicities accumulate per pair.

    Every timestamp must fall inside the segmentation span; the first
    offending edge index is reported otherwise.  Empty segments yield
    empty SegmentGraphs.
    """
    inside = (graph.t >= seg.start) & (graph.t < seg.end)
    if not np.all(inside):
        bad = int(np.argmin(inside))
        raise DataError(
            f"edge {bad} at t={graph.t[bad]} lies outside the segmentation span "
            f"[{seg.start}, {seg.end})")
    idx = np.minimum(((graph.t - seg.start) // seg.width).astype(np.int64),
                     seg.count - 1)
    out = []
    for s in range(seg.count):
        mask = idx == s
        pairs = zip(graph.src[mask], graph.dst[mask])
        out.append(SegmentGraph.from_pairs(s, graph.node_count, pairs))
    return out
