"""Resolve a cloud of partitions into a representative partition.

Every block of every partition is scored by its mean best-match Jaccard
similarity against the other partitions in scope (optionally including
adjacent segments' clouds for temporal smoothing); the representative
keeps the top-scoring blocks, made disjoint greedily, down to the lower
median block count of the cloud.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DataError, Partition


class ResolutionError(ValueError):
    pass


@dataclass
class WorkCounter:
    """Accumulates the charged cost of hashed set intersections."""

    comparisons: int = 0
    work: int = 0

    def charge(self, a: int, b: int):
        self.comparisons += 1
        self.work += min(a, b)


@dataclass(frozen=True)
class PartitionCloud:
    segment_index: int
    partitions: tuple

    def __post_init__(self):
        parts = tuple(self.partitions)
        if not parts:
            raise DataError("a cloud needs at least one partition")
        n = parts[0].n_nodes
        if any(p.n_nodes != n for p in parts):
            raise DataError("cloud partitions must share the node universe")
        object.__setattr__(self, "partitions", parts)

    @property
    def k(self) -> int:
        return len(self.partitions)

    @property
    def n_nodes(self) -> int:
        return self.partitions[0].n_nodes

    def block_counts(self):
        return [p.n_blocks for p in self.partitions]


@dataclass(frozen=True)
class BlockScore:
    source: tuple  # (partition index, block index)
    score: float
    block: frozenset


def similarity(x, y, counter: WorkCounter = None) -> float:
    """Jaccard index |x & y| / |x | y|; iterates the smaller set."""
    if not x and not y:
        raise DataError("similarity of two empty sets is undefined")
    small, large = (x, y) if len(x) <= len(y) else (y, x)
    if counter is not None:
        counter.charge(len(x), len(y))
    inter = sum(1 for v in small if v in large)
    return inter / (len(x) + len(y) - inter)


def _best_match(block, partition_blocks, counter) -> float:
    best = 0.0
    for other in partition_blocks:
        h = similarity(block, other, counter)
        if h > best:
            best = h
    return best


def score_blocks(cloud: PartitionCloud, context=None,
                 counter: WorkCounter = None):
    """Mean best-match similarity of every block against all other runs in scope.

    With context clouds (smoothed mode) the expectation additionally ranges
    over the context clouds' partitions, equally weighted; the run-index
    exclusion l != k applies across every cloud in scope.
    """
    context = list(context or [])
    if cloud.k < 2 and not context:
        raise ResolutionError(
            "expectation undefined: need K >= 2 or context clouds")
    if any(c.n_nodes != cloud.n_nodes for c in context):
        raise DataError("context clouds must share the node universe")

    own_blocks = [[frozenset(b) for b in p.blocks()] for p in cloud.partitions]
    ctx_blocks = [(l, [frozenset(b) for b in p.blocks()])
                  for c in context for l, p in enumerate(c.partitions)]

    out = []
    for k, blocks in enumerate(own_blocks):
        scope = [own_blocks[l] for l in range(cloud.k) if l != k] + \
            [bl for l, bl in ctx_blocks if l != k]
        if not scope:
            raise ResolutionError(
                "expectation undefined: no other runs in scope")
        for x, block in enumerate(blocks):
            total = sum(_best_match(block, other, counter) for other in scope)
            out.append(BlockScore((k, x), total / len(scope), block))
    return out


def median_block_count(cloud: PartitionCloud) -> int:
    """Lower median of the per-partition block counts."""
    counts = sorted(cloud.block_counts())
    return counts[(len(counts) - 1) // 2]


def _sort_key(bs: BlockScore):
    # deterministic, order-independent: best score, then larger block,
    # then lexicographically smallest member list
    return (-bs.score, -len(bs.block), tuple(sorted(bs.block)))


def resolve(cloud: PartitionCloud, context=None,
            counter: WorkCounter = None) -> Partition:
    """Representative partition with exactly the cloud's median block count.

    Scored blocks are accepted greedily in score order, later blocks losing
    already-claimed nodes, until the median count of non-empty blocks is
    reached; a candidate that lost half or more of its members to earlier
    acceptances is treated as a duplicate and skipped, so near-identical
    copies of an already-chosen block cannot consume selection slots.
    Leftover nodes attach to the accepted block best matching any cloud
    block that contains them.
    """
    scores = sorted(score_blocks(cloud, context, counter), key=_sort_key)
    target = median_block_count(cloud)
    n = cloud.n_nodes

    claimed = set()
    accepted = []
    for bs in scores:
        if len(accepted) >= target:
            break
        members = set(bs.block) - claimed
        if 2 * len(members) <= len(bs.block):
            continue  # mostly a duplicate of earlier acceptances
        claimed |= members
        accepted.append(members)

    leftovers = set(range(n)) - claimed
    if leftovers:
        all_blocks = [frozenset(b)
                      for p in cloud.partitions for b in p.blocks()]
        for v in sorted(leftovers):
            containing = [b for b in all_blocks if v in b]
            best = None
            for order, acc in enumerate(accepted):
                sim = max(similarity(acc, b) for b in containing)
                key = (sim, len(acc), -order)
                if best is None or key > best[0]:
                    best = (key, order)
            accepted[best[1]].add(v)

    return Partition.from_blocks(accepted, n_nodes=n)


def resolution_cost_estimate(cloud: PartitionCloud) -> int:
    """Predicted comparison work: sum over ordered run pairs of N*min(c_k, c_l)."""
    counts = cloud.block_counts()
    n = cloud.n_nodes
    total = 0
    for k, ck in enumerate(counts):
        for l, cl in enumerate(counts):
            if k != l:
                total += n * min(ck, cl)
    return total


def smoothing_context(clouds, t: int, radius: int = 1):
    """Adjacent clouds within the window radius, excluding segment t itself."""
    lo = max(0, t - radius)
    hi = min(len(clouds) - 1, t + radius)
    return [clouds[s] for s in range(lo, hi + 1) if s != t]
