"""Dynamic degree-corrected block model: sampling, split/merge schedules, injection.

Edge endpoints (i, j) are drawn with probability proportional to
rate(i, j, t) = theta_i * theta_j * sigma[block_i, block_j](t), evaluated at
the midpoint of the requested segment.  A fixed number of edges is sampled
per segment (Poisson conditioned on its total), which preserves relative
rates while matching the fixed edge budgets used in the experiments.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DataError, DynamicGraph, Partition, SegmentGraph, TimeSegmentation


class ModelError(ValueError):
    """Invalid or degenerate block-model configuration."""


@dataclass(frozen=True)
class SigmaRamp:
    """Linear ramp of one symmetric sigma entry between two times (segment units)."""

    r: int
    s: int
    t_start: float
    t_end: float
    v_start: float
    v_end: float

    def __post_init__(self):
        if self.t_start >= self.t_end:
            raise ModelError("ramp requires t_start < t_end")
        if self.v_start < 0 or self.v_end < 0:
            raise ModelError("sigma values must be non-negative")

    def value_at(self, t: float) -> float:
        if t <= self.t_start:
            return self.v_start
        if t >= self.t_end:
            return self.v_end
        frac = (t - self.t_start) / (self.t_end - self.t_start)
        return self.v_start + frac * (self.v_end - self.v_start)


@dataclass(frozen=True)
class EventSpec:
    """A scheduled community transition over [t_start, t_end] segment indices."""

    kind: str  # split | merge | birth | death
    blocks: tuple
    t_start: int
    t_end: int

    def __post_init__(self):
        if self.kind not in ("split", "merge", "birth", "death"):
            raise ModelError(f"unknown event kind {self.kind!r}")
        if self.t_start >= self.t_end:
            raise ModelError("event requires t_start < t_end")


@dataclass(frozen=True)
class BlockModelSchedule:
    """Time-varying DC-SBM over a fixed finest division into rate blocks.

    Rate-block membership never changes; community dynamics come from
    sigma entries ramping between internal and external levels.  Ground
    truth per segment follows the end-of-transition convention: during a
    transition the truth is already that of the post-transition blocks.
    """

    theta: np.ndarray
    base_blocks: Partition
    base_sigma: np.ndarray
    ramps: tuple = ()
    ground_truth: tuple = ()
    events: tuple = ()
    n_segments: int = 1

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        sigma = np.asarray(self.base_sigma, dtype=np.float64)
        if np.any(theta <= 0):
            raise ModelError("theta entries must be positive")
        r = self.base_blocks.n_blocks
        if sigma.shape != (r, r):
            raise ModelError("base_sigma must be square over the rate blocks")
        if np.any(sigma < 0) or not np.allclose(sigma, sigma.T):
            raise ModelError("base_sigma must be symmetric and non-negative")
        if theta.size != self.base_blocks.n_nodes:
            raise ModelError("theta length must match node count")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "base_sigma", sigma)
        object.__setattr__(self, "ramps", tuple(self.ramps))
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def n_nodes(self) -> int:
        return self.base_blocks.n_nodes

    def sigma_at(self, t: float) -> np.ndarray:
        """The symmetric block-interaction matrix at time t (segment units)."""
        sig = self.base_sigma.copy()
        for ramp in self.ramps:
            v = ramp.value_at(t)
            sig[ramp.r, ramp.s] = v
            sig[ramp.s, ramp.r] = v
        return sig

    def rate_matrix(self, t: float) -> np.ndarray:
        """Pairwise rates theta_i theta_j sigma[b_i, b_j](t), zero diagonal."""
        sig = self.sigma_at(t)
        b = self.base_blocks.labels
        lam = np.outer(self.theta, self.theta) * sig[np.ix_(b, b)]
        np.fill_diagonal(lam, 0.0)
        return lam

    def truth_at(self, segment_index: int) -> Partition:
        if not self.ground_truth:
            return self.base_blocks
        s = min(max(segment_index, 0), len(self.ground_truth) - 1)
        return self.ground_truth[s]


def sample_edge_sequence(model: BlockModelSchedule, segment_index: int,
                         edge_budget: int, rng_seed: int):
    """Draw edge_budget endpoint pairs in order; returns (src, dst) arrays.

    Pairs are sampled with replacement proportionally to the rate matrix
    at the segment midpoint; self-loop draws are excluded by construction.
    Deterministic for a fixed seed, and prefix-stable: the first b draws
    for a larger budget equal the draws for budget b.
    """
    if edge_budget < 1:
        raise ModelError("edge_budget must be >= 1")
    n = model.n_nodes
    t_mid = segment_index + 0.5
    lam = model.rate_matrix(t_mid)
    iu, ju = np.triu_indices(n, k=1)
    rates = lam[iu, ju]
    total = rates.sum()
    if total <= 0:
        raise ModelError("degenerate model: all-zero rate matrix")
    rng = np.random.default_rng(rng_seed)
    # inverse-CDF sampling keeps the draw sequence prefix-stable
    cdf = np.cumsum(rates / total)
    picks = np.searchsorted(cdf, rng.random(edge_budget), side="right")
    picks = np.minimum(picks, rates.size - 1)
    return iu[picks], ju[picks]


def sample_segment(model: BlockModelSchedule, segment_index: int,
                   edge_budget: int, rng_seed: int) -> SegmentGraph:
    """Aggregate exactly edge_budget sampled pairs into a SegmentGraph."""
    src, dst = sample_edge_sequence(model, segment_index, edge_budget, rng_seed)
    return pairs_to_segment(segment_index, model.n_nodes, src, dst)


def pairs_to_segment(segment_index: int, node_count: int, src, dst) -> SegmentGraph:
    """Collapse an endpoint-pair sequence into weighted SegmentGraph form."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * node_count + hi
    uniq, counts = np.unique(key, return_counts=True)
    return SegmentGraph(segment_index, node_count,
                        uniq // node_count, uniq % node_count, counts)


def calibrate_rates(block_sizes, external_internal_ratio: float):
    """Internal/external sigma levels matching a requested edge-ratio.

    With sigma_in = 1 on the diagonal, the expected external:internal edge
    ratio equals (ext_pairs * sigma_out) : int_pairs, so
    sigma_out = ratio * int_pairs / ext_pairs.
    """
    sizes = np.asarray(block_sizes, dtype=np.int64)
    if np.any(sizes < 1):
        raise ModelError("block sizes must be positive")
    int_pairs = int((sizes * (sizes - 1) // 2).sum())
    n = int(sizes.sum())
    ext_pairs = n * (n - 1) // 2 - int_pairs
    if int_pairs == 0 or ext_pairs == 0:
        raise ModelError("need at least two blocks with internal pairs to calibrate")
    sigma_in = 1.0
    sigma_out = external_internal_ratio * int_pairs / ext_pairs
    return sigma_in, sigma_out


def _contiguous_blocks(sizes):
    """Partition of sum(sizes) nodes into consecutive runs of the given sizes."""
    labels = np.concatenate([np.full(sz, lab, dtype=np.int64)
                             for lab, sz in enumerate(sizes)])
    return Partition(labels)


def build_split_merge_model(n_split: int = 100, n_merge: int = 50,
                            n_constant: int = 50, n_constant_blocks: int = 5,
                            n_noise: int = 50,
                            split_window=(2, 4), merge_window=(6, 8),
                            n_segments: int = 10,
                            external_internal_ratio: float = 1.0 / 5.0,
                            noise_rate: float = None,
                            theta: np.ndarray = None) -> BlockModelSchedule:
    """Schedule with one splitting block, one merging pair, constant blocks, noise.

    Rate blocks (finest division): two split halves, two merge sources, the
    constant blocks, and one noise block whose sigma row is uniform.  The
    split is a ramp of the inter-half entry from internal down to external
    over split_window; the merge ramps the inter-source entry upward over
    merge_window.
    """
    if min(n_split, n_merge) < 1 or n_constant_blocks < 0 or n_noise < 0:
        raise ModelError("group sizes must be positive (constants/noise may be 0)")
    if n_constant_blocks > 0 and n_constant < 1:
        raise ModelError("constant block size must be positive")

    half = n_split // 2
    rate_sizes = [half, n_split - half,          # split halves: blocks 0, 1
                  n_merge, n_merge]              # merge sources: blocks 2, 3
    rate_sizes += [n_constant] * n_constant_blocks  # constants: 4..4+k-1
    if n_noise > 0:
        rate_sizes += [n_noise]                  # noise: last block
    base = _contiguous_blocks(rate_sizes)
    n_rate = len(rate_sizes)
    n_nodes = int(sum(rate_sizes))

    sigma_in, sigma_out = calibrate_rates(
        # Calibrate on the merged-state community sizes (split whole, merged
        # pair as one, constants); the ratio target is approximate anyway.
        [n_split, 2 * n_merge] + [n_constant] * n_constant_blocks,
        external_internal_ratio)
    if noise_rate is None:
        noise_rate = sigma_out

    sigma = np.full((n_rate, n_rate), sigma_out)
    np.fill_diagonal(sigma, sigma_in)
    # Pre-split: the two halves are internally connected as one community.
    sigma[0, 1] = sigma[1, 0] = sigma_in
    # Pre-merge: the two sources are separate (external level), ramping up.
    sigma[2, 3] = sigma[3, 2] = sigma_out
    if n_noise > 0:
        # Noise row: equal rate to everything, including itself.
        noise_block = n_rate - 1
        sigma[noise_block, :] = noise_rate
        sigma[:, noise_block] = noise_rate

    ramps = (
        SigmaRamp(0, 1, split_window[0], split_window[1], sigma_in, sigma_out),
        SigmaRamp(2, 3, merge_window[0], merge_window[1], sigma_out, sigma_in),
    )
    events = (
        EventSpec("split", (0, 1), split_window[0], split_window[1]),
        EventSpec("merge", (2, 3), merge_window[0], merge_window[1]),
    )

    def truth_labels(split_done: bool, merge_done: bool) -> Partition:
        groups = []
        if split_done:
            groups += [rate_sizes[0], rate_sizes[1]]
        else:
            groups += [rate_sizes[0] + rate_sizes[1]]
        if merge_done:
            groups += [2 * n_merge]
        else:
            groups += [n_merge, n_merge]
        groups += [n_constant] * n_constant_blocks
        if n_noise > 0:
            groups += [n_noise]
        return _contiguous_blocks(groups)

    truth = tuple(
        truth_labels(split_done=s >= split_window[0],
                     merge_done=s >= merge_window[0])
        for s in range(n_segments))

    if theta is None:
        theta = np.ones(n_nodes)
    return BlockModelSchedule(theta=theta, base_blocks=base, base_sigma=sigma,
                              ramps=ramps, ground_truth=truth, events=events,
                              n_segments=n_segments)


def build_static_model(block_sizes, external_internal_ratio: float = 1.0 / 5.0,
                       theta: np.ndarray = None) -> BlockModelSchedule:
    """Constant-in-time planted-partition model with calibrated rate levels."""
    sigma_in, sigma_out = calibrate_rates(block_sizes, external_internal_ratio)
    base = _contiguous_blocks(list(block_sizes))
    r = base.n_blocks
    sigma = np.full((r, r), sigma_out)
    np.fill_diagonal(sigma, sigma_in)
    if theta is None:
        theta = np.ones(base.n_nodes)
    return BlockModelSchedule(theta=theta, base_blocks=base, base_sigma=sigma,
                              ground_truth=(base,), n_segments=1)


def transition_segments(model: BlockModelSchedule):
    """Segment indices whose underlying sigma is in flux (inclusive windows)."""
    out = set()
    for ev in model.events:
        out.update(range(int(ev.t_start), int(ev.t_end) + 1))
    return sorted(s for s in out if 0 <= s < model.n_segments)


def inject(real: DynamicGraph, model: BlockModelSchedule, seg: TimeSegmentation,
           per_segment_budget: int, cross_fraction: float,
           rng_seed: int) -> DynamicGraph:
    """Append model-sampled nodes and edges to a real segmented edge stream.

    Synthetic node ids start at real.node_count.  Per segment,
    (1 - cross_fraction) * budget edges are synthetic-synthetic draws from
    the model and the rest connect a uniform synthetic node to a uniform
    real node.  Real edges are never modified.
    """
    if real.n_edges == 0:
        raise DataError("cannot inject into an empty real graph")
    if not 0.0 <= cross_fraction <= 1.0:
        raise ModelError("cross_fraction must lie in [0, 1]")
    n_real = real.node_count
    n_synth = model.n_nodes
    n_cross = int(round(cross_fraction * per_segment_budget))
    n_ss = per_segment_budget - n_cross

    src = [real.src]
    dst = [real.dst]
    ts = [real.t]
    rng = np.random.default_rng(rng_seed)
    for s in range(seg.count):
        lo = seg.start + s * seg.width
        if n_ss > 0:
            sg = sample_segment(model, s, n_ss,
                                int(rng.integers(0, 2**63 - 1)))
            u = np.repeat(sg.src, sg.weight) + n_real
            v = np.repeat(sg.dst, sg.weight) + n_real
            src.append(u)
            dst.append(v)
            ts.append(lo + rng.random(u.size) * seg.width)
        if n_cross > 0:
            u = rng.integers(0, n_synth, size=n_cross) + n_real
            v = rng.integers(0, n_real, size=n_cross)
            src.append(u)
            dst.append(v)
            ts.append(lo + rng.random(n_cross) * seg.width)
    return DynamicGraph(n_real + n_synth,
                        np.concatenate(src), np.concatenate(dst),
                        np.concatenate(ts))
