"""File formats: SNAP temporal edge lists, partition/cloud JSON, schedule JSON."""
from __future__ import annotations

import json
import os

import numpy as np

from .core import DataError, DynamicGraph, Partition
from .generator import BlockModelSchedule, EventSpec, SigmaRamp
from .resolver import PartitionCloud


def ingest_snap(path, nodemap_path=None):
    """Parse a "SRC DST TIMESTAMP" edge list with dense node remapping.

    Lines starting with '#' are ignored.  Original ids are remapped to
    [0, N) in sorted order; the mapping is persisted as a sidecar JSON
    file (default: <path>.nodemap.json).
    """
    raw_src, raw_dst, ts = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, "
                                f"got {len(fields)}")
            try:
                u, v, t = int(fields[0]), int(fields[1]), int(fields[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field") from None
            raw_src.append(u)
            raw_dst.append(v)
            ts.append(t)
    if not raw_src:
        raise DataError(f"{path}: no edges")
    ids = sorted(set(raw_src) | set(raw_dst))
    remap = {orig: dense for dense, orig in enumerate(ids)}
    src = np.array([remap[u] for u in raw_src], dtype=np.int64)
    dst = np.array([remap[v] for v in raw_dst], dtype=np.int64)
    t = np.array(ts, dtype=np.float64)
    if nodemap_path is None:
        nodemap_path = str(path) + ".nodemap.json"
    with open(nodemap_path, "w") as fh:
        json.dump({str(orig): dense for orig, dense in remap.items()},
                  fh, sort_keys=True)
    return DynamicGraph(len(ids), src, dst, t)


def write_snap(graph: DynamicGraph, path):
    """Emit a graph in the SNAP edge-list format (integer timestamps rounded)."""
    with open(path, "w") as fh:
        for u, v, t in zip(graph.src, graph.dst, graph.t):
            fh.write(f"{int(u)} {int(v)} {int(round(float(t)))}\n")


def write_ground_truth(model: BlockModelSchedule, path):
    """One "NODE BLOCK" file per segment: <path>.seg<k>.txt."""
    paths = []
    for s in range(model.n_segments):
        truth = model.truth_at(s)
        p = f"{path}.seg{s}.txt"
        with open(p, "w") as fh:
            for node, lab in enumerate(truth.labels):
                fh.write(f"{node} {int(lab)}\n")
        paths.append(p)
    return paths


def read_ground_truth(path) -> Partition:
    labels = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields")
            labels[int(fields[0])] = int(fields[1])
    arr = np.array([labels[i] for i in range(len(labels))], dtype=np.int64)
    return Partition.densify(arr)


def partitions_to_json(reps) -> str:
    """Per-segment label vectors, canonical formatting."""
    doc = {"segments": [[int(x) for x in p.labels] for p in reps]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def partitions_from_json(text):
    doc = json.loads(text)
    return [Partition(np.array(labels, dtype=np.int64))
            for labels in doc["segments"]]


def clouds_to_json(clouds) -> str:
    doc = {"clouds": [{"segment_index": c.segment_index,
                       "partitions": [[int(x) for x in p.labels]
                                      for p in c.partitions]}
                      for c in clouds]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def clouds_from_json(text):
    doc = json.loads(text)
    return [PartitionCloud(d["segment_index"],
                           tuple(Partition(np.array(lv, dtype=np.int64))
                                 for lv in d["partitions"]))
            for d in doc["clouds"]]


def schedule_to_json(model: BlockModelSchedule) -> str:
    doc = {
        "theta": [float(x) for x in model.theta],
        "base_blocks": [int(x) for x in model.base_blocks.labels],
        "base_sigma": [[float(x) for x in row] for row in model.base_sigma],
        "ramps": [{"r": r.r, "s": r.s, "t_start": r.t_start, "t_end": r.t_end,
                   "v_start": r.v_start, "v_end": r.v_end}
                  for r in model.ramps],
        "events": [{"kind": e.kind, "blocks": list(e.blocks),
                    "t_start": e.t_start, "t_end": e.t_end}
                   for e in model.events],
        "ground_truth": [[int(x) for x in p.labels]
                         for p in model.ground_truth],
        "n_segments": model.n_segments,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def schedule_from_json(text) -> BlockModelSchedule:
    doc = json.loads(text)
    return BlockModelSchedule(
        theta=np.array(doc["theta"], dtype=np.float64),
        base_blocks=Partition(np.array(doc["base_blocks"], dtype=np.int64)),
        base_sigma=np.array(doc["base_sigma"], dtype=np.float64),
        ramps=tuple(SigmaRamp(d["r"], d["s"], d["t_start"], d["t_end"],
                              d["v_start"], d["v_end"])
                    for d in doc["ramps"]),
        events=tuple(EventSpec(d["kind"], tuple(d["blocks"]),
                               d["t_start"], d["t_end"])
                     for d in doc["events"]),
        ground_truth=tuple(Partition(np.array(lv, dtype=np.int64))
                           for lv in doc["ground_truth"]),
        n_segments=doc["n_segments"],
    )
