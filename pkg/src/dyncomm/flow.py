"""Community-evolution flow graph: per-segment community nodes linked by overlap.

Node diameter encodes community size (width proportional to sqrt(size));
edge thickness encodes member overlap between communities of adjacent
segments.  Output is deterministic DOT plus canonical JSON.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .core import DataError, Partition


@dataclass(frozen=True)
class FlowNode:
    segment: int
    community: int
    size: int


@dataclass(frozen=True)
class FlowEdge:
    from_segment: int
    from_community: int
    to_community: int
    overlap: int


@dataclass(frozen=True)
class FlowGraph:
    nodes: tuple
    edges: tuple

    @property
    def n_segments(self) -> int:
        return max(n.segment for n in self.nodes) + 1

    def out_degree(self, segment: int, community: int) -> int:
        return sum(1 for e in self.edges
                   if e.from_segment == segment and e.from_community == community)

    def in_degree(self, segment: int, community: int) -> int:
        return sum(1 for e in self.edges
                   if e.from_segment == segment - 1 and e.to_community == community)


def build_flow(reps, min_overlap: int = 1) -> FlowGraph:
    """Flow graph over a sequence of representative partitions.

    One node per (segment, block); an edge joins blocks of adjacent
    segments when they share at least min_overlap members.
    """
    reps = list(reps)
    if len(reps) < 2:
        raise DataError("need at least two segments to build a flow graph")
    n = reps[0].n_nodes
    if any(p.n_nodes != n for p in reps):
        raise DataError("partitions must share the node universe")

    nodes = []
    blocks = []
    for s, p in enumerate(reps):
        bl = p.blocks()
        blocks.append(bl)
        for c, members in enumerate(bl):
            nodes.append(FlowNode(s, c, len(members)))

    edges = []
    for s in range(len(reps) - 1):
        for c_from, a in enumerate(blocks[s]):
            for c_to, b in enumerate(blocks[s + 1]):
                overlap = len(a & b)
                if overlap >= min_overlap:
                    edges.append(FlowEdge(s, c_from, c_to, overlap))
    return FlowGraph(tuple(nodes), tuple(edges))


@dataclass(frozen=True)
class DotScale:
    diameter: float = 0.25  # node width per sqrt(member)
    penwidth: float = 8.0   # edge width per unit overlap fraction
    min_penwidth: float = 0.25


def emit_dot(fg: FlowGraph, scale: DotScale = DotScale()) -> str:
    """Graphviz DOT rendering, byte-stable for identical inputs."""
    size = {(n.segment, n.community): n.size for n in fg.nodes}
    lines = ["digraph community_flow {", "  rankdir=LR;",
             '  node [shape=circle, fixedsize=true, style=filled, '
             'fillcolor=lightsteelblue, fontsize=10];']
    by_segment = {}
    for n in sorted(fg.nodes, key=lambda n: (n.segment, n.community)):
        by_segment.setdefault(n.segment, []).append(n)
    for s in sorted(by_segment):
        names = " ".join(f'"t{n.segment}_c{n.community}";'
                         for n in by_segment[s])
        lines.append(f"  {{ rank=same; {names} }}")
    for n in sorted(fg.nodes, key=lambda n: (n.segment, n.community)):
        width = scale.diameter * (n.size ** 0.5)
        lines.append(
            f'  "t{n.segment}_c{n.community}" '
            f'[label="{n.size}", width={width:.3f}];')
    for e in sorted(fg.edges, key=lambda e: (e.from_segment, e.from_community,
                                             e.to_community)):
        frac = e.overlap / min(size[(e.from_segment, e.from_community)],
                               size[(e.from_segment + 1, e.to_community)])
        pen = max(scale.min_penwidth, scale.penwidth * frac)
        lines.append(
            f'  "t{e.from_segment}_c{e.from_community}" -> '
            f'"t{e.from_segment + 1}_c{e.to_community}" '
            f'[penwidth={pen:.3f}, arrowsize=0.4];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_json(fg: FlowGraph) -> str:
    """Canonical JSON companion: sorted keys, stable ordering, newline-terminated."""
    doc = {
        "nodes": [{"segment": n.segment, "community": n.community,
                   "size": n.size}
                  for n in sorted(fg.nodes,
                                  key=lambda n: (n.segment, n.community))],
        "edges": [{"from_segment": e.from_segment,
                   "from_community": e.from_community,
                   "to_community": e.to_community, "overlap": e.overlap}
                  for e in sorted(fg.edges,
                                  key=lambda e: (e.from_segment,
                                                 e.from_community,
                                                 e.to_community))],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def parse_flow_json(text: str) -> FlowGraph:
    doc = json.loads(text)
    nodes = tuple(FlowNode(d["segment"], d["community"], d["size"])
                  for d in doc["nodes"])
    edges = tuple(FlowEdge(d["from_segment"], d["from_community"],
                           d["to_community"], d["overlap"])
                  for d in doc["edges"])
    return FlowGraph(nodes, edges)
