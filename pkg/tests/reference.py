"""Naive reference implementations used as independent oracles in tests."""
import itertools

import numpy as np

from dyncomm.core import Partition


def naive_jaccard(x, y):
    return len(x & y) / len(x | y)


def naive_score_blocks(cloud, context=None):
    """Plain-loop evaluation of the block-scoring expectation."""
    context = list(context or [])
    own = [[set(b) for b in p.blocks()] for p in cloud.partitions]
    ctx = [(l, [set(b) for b in p.blocks()])
           for c in context for l, p in enumerate(c.partitions)]
    out = []
    for k, blocks in enumerate(own):
        scope = [own[l] for l in range(len(own)) if l != k] + \
            [bl for l, bl in ctx if l != k]
        for x, block in enumerate(blocks):
            sims = [max(naive_jaccard(block, other) for other in part)
                    for part in scope]
            out.append(((k, x), sum(sims) / len(sims), frozenset(block)))
    return out


def naive_resolve(cloud, context=None):
    """Reference evaluation of the resolution formula with the greedy
    disjointness convention (duplicate-remnant skipping included)."""
    scores = naive_score_blocks(cloud, context)
    scores.sort(key=lambda t: (-t[1], -len(t[2]), tuple(sorted(t[2]))))
    counts = sorted(p.n_blocks for p in cloud.partitions)
    target = counts[(len(counts) - 1) // 2]  # lower median
    n = cloud.n_nodes

    claimed = set()
    accepted = []
    for _, _, block in scores:
        if len(accepted) >= target:
            break
        members = set(block) - claimed
        if 2 * len(members) <= len(block):
            continue
        claimed |= members
        accepted.append(members)

    leftovers = sorted(set(range(n)) - claimed)
    all_blocks = [set(b) for p in cloud.partitions for b in p.blocks()]
    for v in leftovers:
        containing = [b for b in all_blocks if v in b]
        best_key, best_idx = None, None
        for order, acc in enumerate(accepted):
            sim = max(naive_jaccard(acc, b) for b in containing)
            key = (sim, len(acc), -order)
            if best_key is None or key > best_key:
                best_key, best_idx = key, order
        accepted[best_idx].add(v)

    labels = np.empty(n, dtype=np.int64)
    for lab, block in enumerate(accepted):
        for v in block:
            labels[v] = lab
    return Partition.densify(labels)


def enumerate_set_partitions(items):
    """All set partitions of a sequence (Bell-number enumeration)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in enumerate_set_partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1:]
        yield [[first]] + smaller
