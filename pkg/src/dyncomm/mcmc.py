"""Stochastic block-membership search over one segment graph.

The objective is a degree-corrected block-model description length: a
Poisson-multigraph fit term plus model-complexity terms (edge-count matrix,
partition, per-block degree sequence).  Lower is better.  Single-node
Metropolis-Hastings moves explore label space; block-count selection runs
agglomeratively from b_max down to b_min, keeping the best description
length seen at any level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import DataError, Partition, SegmentGraph

_INV53 = 1.0 / (1 << 53)


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClustererConfig:
    sweeps: int = 100
    beta: float = 1.0
    b_min: int = 1
    b_max: int = 20
    anneal: bool = True
    rng_seed: int = 0
    epsilon: float = 0.1  # probability of a uniform (vs neighbor-block) proposal
    greedy_passes: int = 20

    def __post_init__(self):
        if self.sweeps < 1:
            raise ClusteringError("sweeps must be >= 1")
        if not 0 < self.epsilon <= 1:
            raise ClusteringError("epsilon must lie in (0, 1]")
        if self.beta < 0:
            raise ClusteringError("beta must be >= 0")
        if not 1 <= self.b_min <= self.b_max:
            raise ClusteringError("need 1 <= b_min <= b_max")


@dataclass(frozen=True)
class ObjectiveValue:
    value: float


# ---------------------------------------------------------------------------
# Description-length terms.  The total for a partition with stub counts e_r,
# sizes n_r and inter-block edge weights m_rs (m_rr = internal weight) is
#
#   sum_{r<=s} pair_term(m_rs, e_r, e_s)
#   + sum_r [ -lgamma(n_r + 1) + ln C(n_r + e_r - 1, e_r) ]
#   + lgamma(N + 1) + ln C(Bp + E - 1, E) + ln C(N - 1, B - 1)
#
# with Bp = B(B+1)/2 over the B non-empty blocks.
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _pair_term(m_rs, e_r, e_s, diagonal):
    if m_rs <= 0:
        return 0.0
    if diagonal:
        return -m_rs * np.log(2.0 * m_rs / (e_r * e_s))
    return -m_rs * np.log(m_rs / (e_r * e_s))


@njit(cache=True, nogil=True)
def _block_term(n_r, e_r):
    if n_r <= 0:
        return 0.0
    out = -math.lgamma(n_r + 1.0)
    if e_r > 0:
        out += math.lgamma(n_r + e_r) - math.lgamma(float(n_r)) \
            - math.lgamma(e_r + 1.0)
    return out


@njit(cache=True, nogil=True)
def _global_term(b_eff, total_e, n_nodes):
    bp = b_eff * (b_eff + 1) / 2.0
    out = math.lgamma(bp + total_e) - math.lgamma(bp) - math.lgamma(total_e + 1.0)
    out += math.lgamma(float(n_nodes)) - math.lgamma(float(b_eff)) \
        - math.lgamma(float(n_nodes - b_eff + 1))
    out += math.lgamma(n_nodes + 1.0)
    return out


@njit(cache=True, nogil=True)
def _description_length(m, e, n, total_e, n_nodes):
    nb = m.shape[0]
    val = 0.0
    b_eff = 0
    for r in range(nb):
        if n[r] > 0:
            b_eff += 1
        val += _block_term(n[r], e[r])
        for s in range(r, nb):
            val += _pair_term(float(m[r, s]), float(e[r]), float(e[s]), r == s)
    val += _global_term(b_eff, float(total_e), n_nodes)
    return val


@njit(cache=True, nogil=True)
def _local_dl(r, s, m, e, n, total_e, n_nodes):
    """The DL terms a move between blocks r and s can change."""
    nb = m.shape[0]
    val = 0.0
    for t in range(nb):
        val += _pair_term(float(m[r, t]), float(e[r]), float(e[t]), r == t)
    for t in range(nb):
        if t != r:
            val += _pair_term(float(m[s, t]), float(e[s]), float(e[t]), s == t)
    val += _block_term(n[r], e[r]) + _block_term(n[s], e[s])
    b_eff = 0
    for t in range(nb):
        if n[t] > 0:
            b_eff += 1
    val += _global_term(b_eff, float(total_e), n_nodes)
    return val


@njit(cache=True, nogil=True)
def _apply_move(i, r, s, indptr, indices, weights, deg, b, m, e, n):
    for k in range(indptr[i], indptr[i + 1]):
        t = b[indices[k]]
        w = weights[k]
        if t == r:
            m[r, r] -= w
        else:
            m[r, t] -= w
            m[t, r] -= w
        if t == s:
            m[s, s] += w
        else:
            m[s, t] += w
            m[t, s] += w
    e[r] -= deg[i]
    e[s] += deg[i]
    n[r] -= 1
    n[s] += 1
    b[i] = s


@njit(cache=True, nogil=True)
def _rng_u64(state):
    # splitmix64
    z = (state[0] + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    state[0] = z
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) \
        & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) \
        & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _rng_uniform(state):
    return float(_rng_u64(state) >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def _rng_int(state, n):
    return np.int64(_rng_u64(state) % np.uint64(n))


@njit(cache=True, nogil=True)
def _mh_sweep(indptr, indices, weights, deg, b, m, e, n, total_e, n_nodes,
              beta, eps, state):
    """One full Metropolis-Hastings pass over all nodes; returns the DL change."""
    nb = m.shape[0]
    dl_change = 0.0
    for i in range(n_nodes):
        r = b[i]
        d = deg[i]
        # propose a target block
        if d == 0 or _rng_uniform(state) < eps:
            s = _rng_int(state, nb)
        else:
            target = _rng_uniform(state) * d
            acc = 0.0
            s = r
            for k in range(indptr[i], indptr[i + 1]):
                acc += weights[k]
                if acc > target:
                    s = b[indices[k]]
                    break
        if s == r:
            continue
        old = _local_dl(r, s, m, e, n, total_e, n_nodes)
        _apply_move(i, r, s, indptr, indices, weights, deg, b, m, e, n)
        new = _local_dl(r, s, m, e, n, total_e, n_nodes)
        delta = new - old
        accept = False
        if beta == 0.0:
            accept = True
        elif np.isinf(beta):
            accept = delta <= 0.0
        else:
            if d > 0:
                w_r = 0.0
                w_s = 0.0
                for k in range(indptr[i], indptr[i + 1]):
                    t = b[indices[k]]
                    w = weights[k]
                    if t == r:
                        w_r += w
                    elif t == s:
                        w_s += w
                q_fwd = eps / nb + (1.0 - eps) * w_s / d
                q_rev = eps / nb + (1.0 - eps) * w_r / d
            else:
                q_fwd = 1.0
                q_rev = 1.0
            a = math.exp(-beta * delta) * q_rev / q_fwd
            accept = a >= 1.0 or _rng_uniform(state) < a
        if accept:
            dl_change += delta
        else:
            _apply_move(i, s, r, indptr, indices, weights, deg, b, m, e, n)
    return dl_change


# ---------------------------------------------------------------------------
# Python-level helpers
# ---------------------------------------------------------------------------

def _csr(g: SegmentGraph):
    """Symmetric CSR adjacency (both directions of every pair)."""
    n = g.node_count
    src = np.concatenate([g.src, g.dst])
    dst = np.concatenate([g.dst, g.src])
    w = np.concatenate([g.weight, g.weight])
    order = np.lexsort((dst, src))
    src, dst, w = src[order], dst[order], w[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, src, w)
    return indptr, dst.astype(np.int64), w.astype(np.int64), deg


def _block_stats(g: SegmentGraph, labels: np.ndarray, nb: int):
    """Inter-block weights m, stub counts e and sizes n for a labeling."""
    m = np.zeros((nb, nb), dtype=np.int64)
    bs = labels[g.src]
    bd = labels[g.dst]
    np.add.at(m, (bs, bd), g.weight)
    np.add.at(m, (bd, bs), g.weight)
    diag = np.arange(nb)
    m[diag, diag] //= 2
    e = np.zeros(nb, dtype=np.int64)
    np.add.at(e, bs, g.weight)
    np.add.at(e, bd, g.weight)
    n = np.bincount(labels, minlength=nb)
    return m, e, n


def _objective_terms(g: SegmentGraph, labels: np.ndarray):
    nb = int(labels.max()) + 1
    m, e, n = _block_stats(g, labels, nb)
    total_e = g.total_weight
    terms = []
    for r in range(nb):
        terms.append(_block_term(int(n[r]), int(e[r])))
        for s in range(r, nb):
            terms.append(_pair_term(float(m[r, s]), float(e[r]), float(e[s]),
                                    r == s))
    b_eff = int(np.count_nonzero(n))
    terms.append(_global_term(b_eff, float(total_e), g.node_count))
    return terms


def objective(g: SegmentGraph, p: Partition) -> ObjectiveValue:
    """Description length of (g, p); exactly invariant under label permutation."""
    if p.n_nodes != g.node_count:
        raise DataError("partition and graph node counts differ")
    if g.total_weight == 0:
        raise ClusteringError("nothing to cluster: empty graph")
    terms = _objective_terms(g, p.labels)
    return ObjectiveValue(math.fsum(sorted(terms)))


def _dl_raw(g: SegmentGraph, labels: np.ndarray) -> float:
    """Description length of a possibly gappy labeling (empty labels allowed)."""
    nb = int(labels.max()) + 1
    m, e, n = _block_stats(g, labels, nb)
    return float(_description_length(m, e, n, g.total_weight, g.node_count))


def propose_and_accept(state: Partition, node: int, g: SegmentGraph,
                       cfg: ClustererConfig, rng: np.random.Generator) -> Partition:
    """One Metropolis-Hastings step for a single node, over set-partition space.

    States are canonical partitions (labels dense by first appearance); the
    Hastings correction sums proposal probability over all raw block labels
    in [0, b_max) that lead to the same target partition, so detailed balance
    holds exactly for beta > 0.  beta == 0 accepts every proposal.
    """
    if not 0 <= node < state.n_nodes:
        raise DataError(f"invalid node {node}")
    nb = min(cfg.b_max, state.n_nodes)
    labels = state.labels
    r = int(labels[node])
    d = 0
    w_to = {}
    pw = g.pair_weights()
    for (u, v), w in pw.items():
        if u == node:
            w_to[int(labels[v])] = w_to.get(int(labels[v]), 0) + w
            d += w
        elif v == node:
            w_to[int(labels[u])] = w_to.get(int(labels[u]), 0) + w
            d += w

    # raw proposal
    if d == 0 or rng.random() < cfg.epsilon:
        s_raw = int(rng.integers(0, nb))
    else:
        target = rng.random() * d
        acc = 0.0
        s_raw = r
        for lab in sorted(w_to):
            acc += w_to[lab]
            if acc > target:
                s_raw = lab
                break

    others = set(int(x) for i, x in enumerate(labels) if i != node)
    fresh = s_raw >= state.n_blocks or (s_raw not in others and s_raw != r)
    alone = r not in others
    if fresh and alone:
        return state  # singleton moved to another empty label: same partition
    if s_raw == r:
        return state  # null move

    new_labels = labels.copy()
    if fresh:
        new_labels[node] = max(others) + 1
    else:
        new_labels[node] = s_raw
    new_part = Partition.densify(new_labels)
    delta = objective(g, new_part).value - objective(g, state).value

    if cfg.beta == 0.0:
        return new_part
    if math.isinf(cfg.beta):
        return new_part if delta <= 0 else state

    def q_to(target_fresh, target_label, n_labels_used, weights):
        if d == 0:
            # zero-degree nodes always propose uniformly
            return (nb - n_labels_used) / nb if target_fresh else 1.0 / nb
        if target_fresh:
            return cfg.epsilon * (nb - n_labels_used) / nb
        return cfg.epsilon / nb + (1 - cfg.epsilon) * weights.get(target_label, 0) / d

    q_fwd = q_to(fresh, s_raw, len(others), w_to)
    # reverse move: from new_part, move the node back to its old block
    new_lab = new_part.labels
    others_new = set(int(x) for i, x in enumerate(new_lab) if i != node)
    w_to_new = {}
    for (u, v), w in pw.items():
        if u == node:
            w_to_new[int(new_lab[v])] = w_to_new.get(int(new_lab[v]), 0) + w
        elif v == node:
            w_to_new[int(new_lab[u])] = w_to_new.get(int(new_lab[u]), 0) + w
    if alone:
        # the old block was a singleton of this node: reverse is a fresh move
        q_rev = q_to(True, -1, len(others_new), w_to_new)
    else:
        # find the old block's label in the densified new labeling
        anchor = next(i for i, x in enumerate(labels)
                      if i != node and int(x) == r)
        q_rev = q_to(False, int(new_lab[anchor]), len(others_new), w_to_new)

    if q_fwd <= 0:
        return state
    a = math.exp(-cfg.beta * delta) * q_rev / q_fwd
    if a >= 1.0 or rng.random() < a:
        return new_part
    return state


def _merge_best_pair(g: SegmentGraph, labels: np.ndarray) -> np.ndarray:
    """Merge the pair of non-empty blocks with the smallest DL increase."""
    nb = int(labels.max()) + 1
    m, e, n = _block_stats(g, labels, nb)
    total_e = g.total_weight
    nonempty = [r for r in range(nb) if n[r] > 0]
    best = None
    for ai in range(len(nonempty)):
        for bi in range(ai + 1, len(nonempty)):
            r, s = nonempty[ai], nonempty[bi]
            m2 = m.copy()
            m2[r, :] += m2[s, :]
            m2[:, r] += m2[:, s]
            m2[r, r] -= m[r, s]  # fold the cross weight in once, not twice
            m2[s, :] = 0
            m2[:, s] = 0
            e2 = e.copy()
            e2[r] += e2[s]
            e2[s] = 0
            n2 = n.copy()
            n2[r] += n2[s]
            n2[s] = 0
            dl = float(_description_length(m2, e2, n2, total_e, g.node_count))
            if best is None or dl < best[0]:
                best = (dl, r, s)
    if best is None:
        return labels
    _, r, s = best
    out = labels.copy()
    out[out == s] = r
    return out


def _compact(labels: np.ndarray) -> np.ndarray:
    """Map possibly-gappy labels onto [0, n_used) by first appearance."""
    return Partition.densify(labels).labels


def _assign_isolated(g: SegmentGraph, labels: np.ndarray,
                     deg: np.ndarray) -> np.ndarray:
    """Deterministic post-hoc placement of zero-degree nodes (lowest-DL block)."""
    labels = labels.copy()
    nb = int(labels.max()) + 1
    for i in np.flatnonzero(deg == 0):
        best_lab, best_dl = None, None
        for lab in range(nb):
            labels[i] = lab
            dl = _dl_raw(g, labels)
            if best_dl is None or dl < best_dl - 1e-12:
                best_lab, best_dl = lab, dl
        labels[i] = best_lab
    return labels


def cluster(g: SegmentGraph, cfg: ClustererConfig) -> Partition:
    """Best partition found by annealed MH sweeps with agglomerative descent.

    Runs a chain at every block-count level from b_max down to b_min, merging
    the cheapest block pair between levels, and returns the lowest
    description length seen at any level with a block count inside
    [b_min, b_max].  Deterministic for a fixed seed.
    """
    if g.total_weight == 0:
        raise ClusteringError("nothing to cluster: empty graph")
    n_nodes = g.node_count
    b_max = min(cfg.b_max, n_nodes)
    b_min = cfg.b_min
    rng = np.random.default_rng(cfg.rng_seed)
    indptr, indices, weights, deg = _csr(g)
    total_e = g.total_weight

    labels = rng.integers(0, b_max, size=n_nodes).astype(np.int64)
    best_dl, best_labels = math.inf, None

    level = b_max
    while level >= b_min:
        labels = _compact(labels)
        nb = max(int(labels.max()) + 1, 1)
        b = labels.copy()
        m, e, n = _block_stats(g, b, nb)
        cur_dl = float(_description_length(m, e, n, total_e, n_nodes))
        level_best_dl, level_best = cur_dl, b.copy()
        state = np.array([rng.integers(1, 2**63 - 1)], dtype=np.uint64)

        for sweep in range(cfg.sweeps):
            if cfg.anneal:
                warm = max(1, cfg.sweeps // 2)
                beta = cfg.beta * min(1.0, (sweep + 1) / warm)
            else:
                beta = cfg.beta
            cur_dl += _mh_sweep(indptr, indices, weights, deg, b, m, e, n,
                                total_e, n_nodes, beta, cfg.epsilon, state)
            if cur_dl < level_best_dl - 1e-9:
                level_best_dl, level_best = cur_dl, b.copy()
        # greedy polish from the level's best state
        b = level_best.copy()
        m, e, n = _block_stats(g, b, nb)
        cur_dl = float(_description_length(m, e, n, total_e, n_nodes))
        for _ in range(cfg.greedy_passes):
            change = _mh_sweep(indptr, indices, weights, deg, b, m, e, n,
                               total_e, n_nodes, math.inf, cfg.epsilon, state)
            cur_dl += change
            if change >= -1e-9:
                break
        if cur_dl < level_best_dl:
            level_best_dl, level_best = cur_dl, b.copy()

        c_eff = len(np.unique(level_best))
        if b_min <= c_eff <= cfg.b_max and level_best_dl < best_dl:
            best_dl, best_labels = level_best_dl, level_best.copy()

        if c_eff <= b_min or c_eff == 1:
            break
        labels = _merge_best_pair(g, _compact(level_best))
        level = len(np.unique(labels))

    if best_labels is None:
        # no level landed inside [b_min, b_max]; force-merge down to b_max
        labels = _compact(labels)
        while len(np.unique(labels)) > cfg.b_max:
            labels = _compact(_merge_best_pair(g, labels))
        best_labels = labels

    best_labels = _assign_isolated(g, _compact(best_labels), deg)
    return Partition.densify(best_labels)
