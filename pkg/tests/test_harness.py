import json
import os
import time

import numpy as np
import pytest

from dyncomm.cli import main
from dyncomm.core import DataError, Partition
from dyncomm.generator import build_static_model, sample_segment
from dyncomm.harness import (ConfigError, ExperimentConfig, derive_seed,
                             run_experiment, run_segment_pipeline,
                             weekly_segmentation)
from dyncomm.mcmc import ClustererConfig, cluster
from dyncomm.snapio import ingest_snap, read_ground_truth, write_snap


# --- SNAP ingestion ---------------------------------------------------------

def test_ingest_single_line(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("0 1 100\n")
    g = ingest_snap(p)
    assert g.node_count == 2
    assert g.n_edges == 1
    assert (g.src[0], g.dst[0], g.t[0]) == (0, 1, 100.0)


def test_ingest_comments_and_remap(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("# header\n70 30 5\n30 90 6\n")
    g = ingest_snap(p, tmp_path / "map.json")
    # dense ids assigned in sorted original-id order: 30->0, 70->1, 90->2
    assert g.node_count == 3
    mapping = json.loads((tmp_path / "map.json").read_text())
    assert mapping == {"30": 0, "70": 1, "90": 2}


def test_ingest_no_edges_rejected(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("# only a comment\n")
    with pytest.raises(DataError, match="no edges"):
        ingest_snap(p)


def test_ingest_malformed_line_reports_location(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("0 1 100\n0 oops 200\n")
    with pytest.raises(DataError, match=r"edges\.txt:2"):
        ingest_snap(p)


def test_snap_round_trip(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("0 1 100\n1 2 200\n0 2 50\n")
    g = ingest_snap(p)
    q = tmp_path / "copy.txt"
    write_snap(g, q)
    g2 = ingest_snap(q)
    assert np.array_equal(g.src, g2.src)
    assert np.array_equal(g.dst, g2.dst)
    assert np.array_equal(g.t, g2.t)


def test_weekly_segmentation_starts_at_first_timestamp(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("0 1 1000\n1 2 2000\n")
    seg = weekly_segmentation(ingest_snap(p), 3)
    assert seg.start == 1000.0
    assert seg.width == 7 * 24 * 3600
    assert seg.count == 3


# --- seed derivation --------------------------------------------------------

def test_derived_seeds_distinct_and_stable():
    seen = set()
    for tag in range(2):
        for rep in range(3):
            for seg in range(3):
                for k in range(3):
                    s = derive_seed(7, tag, rep, seg, k)
                    assert s == derive_seed(7, tag, rep, seg, k)
                    seen.add(s)
    assert len(seen) == 2 * 3 * 3 * 3
    assert derive_seed(8, 0, 0, 0, 0) != derive_seed(7, 0, 0, 0, 0)


# --- segment pipeline -------------------------------------------------------

@pytest.fixture(scope="module")
def planted_segment():
    model = build_static_model([20, 20], external_internal_ratio=0.15)
    return sample_segment(model, 0, 300, 11)


def test_pipeline_matches_direct_cluster(planted_segment):
    g = planted_segment
    template = ClustererConfig(sweeps=20, b_max=6)
    seeds = [derive_seed(1, 1, 0, 0, k) for k in range(3)]
    cloud = run_segment_pipeline(g, 3, template, seeds)
    assert cloud.k == 3
    for seed, p in zip(seeds, cloud.partitions):
        import dataclasses
        direct = cluster(g, dataclasses.replace(template, rng_seed=seed))
        assert np.array_equal(p.labels, direct.labels)


def test_pipeline_worker_count_invariance(planted_segment):
    g = planted_segment
    template = ClustererConfig(sweeps=20, b_max=6)
    seeds = [derive_seed(2, 1, 0, 0, k) for k in range(4)]
    one = run_segment_pipeline(g, 4, template, seeds, workers=1)
    four = run_segment_pipeline(g, 4, template, seeds, workers=4)
    for a, b in zip(one.partitions, four.partitions):
        assert np.array_equal(a.labels, b.labels)


def test_pipeline_seed_count_mismatch(planted_segment):
    with pytest.raises(ConfigError):
        run_segment_pipeline(planted_segment, 3,
                             ClustererConfig(sweeps=5), [1, 2])


def test_segment_runs_do_not_depend_on_other_segments(planted_segment):
    # memoryless clustering: the result for one segment graph is a pure
    # function of that graph and the seeds
    g = planted_segment
    template = ClustererConfig(sweeps=15, b_max=6)
    seeds = [derive_seed(3, 1, 0, 0, k) for k in range(2)]
    before = run_segment_pipeline(g, 2, template, seeds)
    other = sample_segment(build_static_model([10, 10, 10], 0.5), 0, 200, 99)
    run_segment_pipeline(other, 2, template, seeds)  # unrelated work between
    after = run_segment_pipeline(g, 2, template, seeds)
    for a, b in zip(before.partitions, after.partitions):
        assert np.array_equal(a.labels, b.labels)


@pytest.mark.slow
@pytest.mark.skipif((os.cpu_count() or 1) < 4,
                    reason="needs >= 4 cpus to observe parallel speedup")
def test_pipeline_parallel_speedup():
    model = build_static_model([50] * 8, external_internal_ratio=0.2)
    g = sample_segment(model, 0, 1900, 5)
    template = ClustererConfig(sweeps=60, b_max=12)
    seeds = list(range(8))
    run_segment_pipeline(g, 8, template, seeds, workers=1)  # jit warm-up
    t0 = time.perf_counter()
    run_segment_pipeline(g, 8, template, seeds, workers=1)
    serial = time.perf_counter() - t0
    t0 = time.perf_counter()
    run_segment_pipeline(g, 8, template, seeds, workers=4)
    parallel = time.perf_counter() - t0
    assert parallel < 0.6 * serial


# --- experiment config ------------------------------------------------------

def test_config_rejects_unknown_mode():
    with pytest.raises(ConfigError, match="unknown mode"):
        ExperimentConfig(mode="bogus")


def test_config_requires_dataset_for_real_modes():
    with pytest.raises(ConfigError, match="requires a dataset"):
        ExperimentConfig(mode="real")


def test_config_from_json_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"mode": "emerging", "n_nodes": 40,
                                "master_seed": 5}))
    cfg = ExperimentConfig.from_json(path, {"master_seed": 9})
    assert cfg.n_nodes == 40
    assert cfg.master_seed == 9


def test_config_from_json_unknown_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"mode": "emerging", "n_nodez": 40}))
    with pytest.raises(ConfigError, match="n_nodez"):
        ExperimentConfig.from_json(path)


def test_budgets_enumeration():
    cfg = ExperimentConfig(mode="emerging", budget_min=1000, budget_max=1900,
                           budget_step=100)
    assert cfg.budgets() == list(range(1000, 2000, 100))


# --- end-to-end runs --------------------------------------------------------

def tiny_emerging(tmp_path, name, seed=1):
    return ExperimentConfig(
        mode="emerging", name=name, output_dir=str(tmp_path),
        master_seed=seed, ensemble_size=2, repetitions=2,
        sweeps=10, b_max=4, n_nodes=40, n_blocks=2,
        external_internal_ratio=0.15,
        budget_min=200, budget_max=300, budget_step=100)


@pytest.mark.slow
def test_emerging_run_outputs_and_determinism(tmp_path):
    out1 = run_experiment(tiny_emerging(tmp_path, "a"))
    out2 = run_experiment(tiny_emerging(tmp_path, "b"))
    for rel in ("manifest.json", "baseline/metrics.csv",
                "ensemble/metrics.csv", "baseline/partitions.json",
                "ensemble/partitions.json", "schedule.json"):
        assert os.path.exists(os.path.join(out1, rel))
    for rel in ("baseline/metrics.csv", "ensemble/metrics.csv",
                "baseline/partitions.json", "ensemble/partitions.json"):
        with open(os.path.join(out1, rel)) as f1, \
                open(os.path.join(out2, rel)) as f2:
            assert f1.read() == f2.read()
    csv = open(os.path.join(out1, "ensemble/metrics.csv")).read().splitlines()
    assert csv[0] == "x,method,metric,mean,stderr,n_defined,n_undefined"
    assert len(csv) == 1 + 2 * 3  # 2 budgets x 3 metrics


@pytest.mark.slow
def test_synthetic_dynamic_run_small(tmp_path):
    cfg = ExperimentConfig(
        mode="synthetic-dynamic", name="dyn", output_dir=str(tmp_path),
        master_seed=3, ensemble_size=2, repetitions=1, sweeps=10, b_max=12,
        n_segments=3, edges_per_segment=600)
    out = run_experiment(cfg)
    for method in ("baseline", "ensemble", "smoothed"):
        assert os.path.exists(os.path.join(out, method, "metrics.csv"))
        assert os.path.exists(os.path.join(out, method, "flow.dot"))
        assert os.path.exists(os.path.join(out, method, "flow.json"))
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["transition_segments"] == [2]
    assert manifest["config"]["master_seed"] == 3


def test_failed_run_leaves_no_partial_output(tmp_path):
    cfg = ExperimentConfig(
        mode="emerging", name="boom", output_dir=str(tmp_path),
        ensemble_size=2, repetitions=1, sweeps=5,
        n_nodes=10, n_blocks=3, budget_min=50, budget_max=50,
        b_min=5, b_max=4)  # impossible block bounds
    with pytest.raises(Exception):
        run_experiment(cfg)
    assert not os.path.exists(os.path.join(tmp_path, "boom"))


# --- command line -----------------------------------------------------------

@pytest.mark.slow
def test_cli_round_trip(tmp_path, capsys):
    prefix = str(tmp_path / "data")
    # enough edges that every node appears; ingest keeps only observed nodes
    assert main(["generate", "--model", "static", "--segments", "2",
                 "--edges-per-segment", "4000", "--seed", "4",
                 "--out", prefix]) == 0
    edges = prefix + ".edges.txt"
    assert os.path.exists(edges)

    clouds = str(tmp_path / "clouds.json")
    assert main(["cluster", "--edges", edges, "--width", "1",
                 "--segments", "2", "--ensemble-size", "2",
                 "--sweeps", "10", "--b-max", "10", "--seed", "4",
                 "--out", clouds]) == 0

    parts = str(tmp_path / "parts.json")
    assert main(["resolve", "--clouds", clouds, "--out", parts]) == 0

    metrics = str(tmp_path / "metrics.csv")
    # the static model's truth is constant, so reuse the one truth file
    assert main(["evaluate", "--partitions", parts, "--truth",
                 prefix + ".truth.seg0.txt", prefix + ".truth.seg0.txt",
                 "--out", metrics]) == 0
    assert "precision" in open(metrics).read()

    dot = str(tmp_path / "flow.dot")
    fjson = str(tmp_path / "flow.json")
    assert main(["flow", "--partitions", parts, "--dot", dot,
                 "--json", fjson]) == 0
    assert open(dot).read().startswith("digraph")


def test_cli_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["cluster", "--edges", "x"]) == 1  # missing required args
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "emerging", "bogus_key": 1}))
    assert main(["run", "--config", str(cfg)]) == 1


def test_cli_data_errors(tmp_path, capsys):
    missing = str(tmp_path / "missing.txt")
    assert main(["cluster", "--edges", missing, "--width", "1",
                 "--segments", "1", "--out", str(tmp_path / "o.json")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 nope\n")
    assert main(["cluster", "--edges", str(bad), "--width", "1",
                 "--segments", "1", "--out", str(tmp_path / "o.json")]) == 2


def test_ground_truth_files_round_trip(tmp_path, capsys):
    prefix = str(tmp_path / "gt")
    assert main(["generate", "--segments", "2", "--edges-per-segment", "100",
                 "--out", prefix]) == 0
    truth = read_ground_truth(prefix + ".truth.seg0.txt")
    assert isinstance(truth, Partition)
    assert truth.n_nodes == 500
