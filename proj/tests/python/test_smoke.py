import csv
import json

import numpy as np
import pytest

import dynembed

SMALL_SBM = {
    "type": "sbm",
    "block_sizes": [25, 25],
    "p_in": 0.3,
    "p_cross": 0.03,
    "migrate_lo": 2,
    "migrate_hi": 3,
    "cross_edges_per_migrant": 4,
    "seed": 1,
}


def small_config(method, **overrides):
    cfg = {
        "dataset": SMALL_SBM,
        "method": method,
        "embed_dim": 4,
        "lookback": 2,
        "decoder_widths": [16, 50],
        "train": {"epochs": 5, "batch_size": 25, "lr": 0.005},
        "seed": 3,
    }
    if method == "ae":
        cfg["encoder_widths"] = [16, 4]
    cfg.update(overrides)
    return cfg


def test_snapshot_and_graph():
    s = dynembed.Snapshot(3, [(0, 1, 1.0), (1, 2, 2.0)])
    assert len(s) == 2
    assert s.num_entries == 4
    a = s.adjacency()
    assert a.shape == (3, 3)
    assert a[0, 1] == a[1, 0] == 0.5
    g = dynembed.DynamicGraph([s, s])
    assert g.num_steps == 2 and g.num_nodes == 3
    with pytest.raises(ValueError):
        dynembed.Snapshot(2, [(0, 5, 1.0)])


def test_sbm_generation(tmp_path):
    graph, labels, migrants = dynembed.generate_sbm("shift", seed=2, steps=4, block_sizes=[40, 40])
    assert graph.num_steps == 4 and graph.num_nodes == 80
    assert len(labels) == 4 and len(labels[0]) == 80
    assert len(migrants[0]) == 10 and migrants[-1] == []
    path = tmp_path / "snapshots.txt"
    dynembed.save_snapshots(graph, path)
    again = dynembed.load_snapshots(path)
    assert again.snapshot(2) == graph.snapshot(2)
    snap, _ = dynembed.generate_static_sbm([500, 500], 0.1, 0.01, seed=1)
    assert abs(snap.num_entries - 56016) < 0.05 * 56016


def test_metrics():
    gt = dynembed.Snapshot(4, [(0, 1, 1.0), (0, 3, 1.0)])
    scores = np.zeros((4, 4))
    scores[0, 1:] = [0.9, 0.5, 0.1]
    assert dynembed.precision_at_k(scores, gt, 0, 2) == 0.5
    result = dynembed.map_score(scores, gt, nodes=[0])
    assert result["map"] == pytest.approx(5 / 6)
    assert set(result["precision_at_k"]) == {2, 10, 100, 200, 300, 500, 800, 1000}


def test_svd_baselines():
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, (20, 20))
    state = dynembed.optimal_svd(a, 5)
    s = np.linalg.svd(a, compute_uv=False)
    assert state.error_at_last_rerun == pytest.approx(np.sqrt((s[5:] ** 2).sum()), abs=1e-8)
    b = a.copy()
    b[0, 1] += 1.0
    rerun = dynembed.rerun_svd_step(state, b, 0.0)
    opt = dynembed.optimal_svd(b, 5)
    assert dynembed.reconstruction_error(rerun, b) == pytest.approx(opt.error_at_last_rerun, abs=1e-8)
    inc = dynembed.inc_svd_update(state, b)
    assert dynembed.reconstruction_error(inc, b) >= opt.error_at_last_rerun - 1e-9
    scores = dynembed.svd_scores(inc)
    assert np.allclose(scores, scores.T) and np.all(np.diag(scores) == 0)


def test_config_defaults_and_errors():
    cfg = dynembed.normalize_config({})
    assert cfg["method"] == "aernn" and cfg["embed_dim"] == 128 and cfg["train"]["epochs"] == 250
    with pytest.raises(ValueError, match="colour"):
        dynembed.normalize_config({"colour": 1})


def test_run_experiment_baseline_and_learned(tmp_path):
    report, model = dynembed.run_experiment(small_config("rerun-svd"))
    assert model is None
    assert 0.0 < report["mean_map"] <= 1.0
    assert report["audit"]["clean"]

    out = tmp_path / "run"
    report, model = dynembed.run_experiment(small_config("ae"), out_dir=out)
    assert model.kind == "ae" and model.embed_dim == 4
    assert len(report["train_loss"]) == 5
    for name in ["report.csv", "report.json", "manifest.json", "map.svg", "model.ckpt"]:
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["method"] == "ae"
    with open(out / "report.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == len(report["steps"]) * 8

    graph = dynembed.DynamicGraph([dynembed.generate_static_sbm([25, 25], 0.3, 0.03, seed=s)[0] for s in range(5)])
    y = model.embed(graph, 3)
    assert y.shape == (50, 4)
    p = model.predict_next(graph, 3)
    assert p.shape == (50, 50) and np.all(np.diag(p) == 0)

    loaded = dynembed.load_model(out / "model.ckpt")
    assert np.array_equal(loaded.embed(graph, 3), y)

    emb = tmp_path / "emb.csv"
    dynembed.export_embeddings(out / "model.ckpt", small_config("ae"), 3, emb)
    lines = emb.read_text().splitlines()
    assert lines[0] == "id,y0,y1,y2,y3" and len(lines) == 51


def test_sweeps():
    rows = dynembed.sweep_lookback(small_config("ae", encoder_widths=[16, 4]), lookbacks=[1, 2])
    assert sorted(rows) == [1, 2]
    assert all(0.0 <= v <= 1.0 for v in rows.values())
    hist = dynembed.sweep_history(small_config("ae", lookback=1))
    assert sorted(hist) == [2, 3, 4, 5]


def test_validation_errors():
    with pytest.raises(ValueError, match="lookback"):
        dynembed.run_experiment(small_config("ae", lookback=3, dataset=dict(SMALL_SBM, steps=3)))
