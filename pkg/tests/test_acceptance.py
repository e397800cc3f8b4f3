"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest
from _helpers import (
    ap_oracle,
    central_difference,
    end_to_end_errors,
    is_generic,
    mann_whitney_oracle,
    rel_error,
    tiny_pcnn_spec,
)

from persiland.analysis import landscape_activity_correlation
from persiland.cli import main
from persiland.config import RunConfig
from persiland.data import SyntheticConfig, generate_synthetic
from persiland.landscape import LandscapeSpec, sample_landscape
from persiland.metrics import evaluate
from persiland.network import (
    Network,
    PersistenceLayerSpec,
    PersistentTagger,
    concat_forward,
    persistence_backward,
    persistence_forward,
)
from persiland.topology import BirthDeathPair, PersistenceDiagram, brute_force_pairs, compute_pairs


def test_1_topology_oracle_equivalence(acceptance_report):
    rng = np.random.default_rng(2024)
    signals = [rng.integers(0, 9, size=rng.integers(1, 65)).astype(float) for _ in range(1000)]
    start = time.perf_counter()
    mismatches = sum(
        sorted(compute_pairs(s).as_multiset()) != sorted(brute_force_pairs(s).as_multiset()) for s in signals
    )
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 5.0
    acceptance_report(1, ok, f"{mismatches} mismatches on 1000 signals in {elapsed:.2f}s (limit 5s)")
    assert ok


def _random_diagram(rng):
    n = int(rng.integers(0, 15))
    deaths = rng.uniform(-2, 5, n)
    births = deaths + rng.exponential(2.0, n) * (rng.random(n) > 0.1)  # some zero-persistence pairs
    order = np.argsort(-births, kind="stable")
    pairs = [BirthDeathPair(float(births[i]), float(deaths[i]), j, j) for j, i in enumerate(order)]
    return PersistenceDiagram.from_pairs(pairs, max(n, 1))


def test_2_landscape_correctness(acceptance_report):
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(200):
        spec = LandscapeSpec(float(rng.uniform(-1, 1)), float(rng.uniform(2, 6)), int(rng.integers(1, 7)),
                             int(rng.integers(1, 16)))
        v = sample_landscape(_random_diagram(rng), spec).values
        bad += not (np.all(v >= 0) and np.all(v[:-1] >= v[1:]))
    d1 = PersistenceDiagram.from_pairs([BirthDeathPair(2, 0, 1, 0)], 3)
    d2 = compute_pairs([0, 2, 0, 1, 0])
    ex1 = np.array_equal(sample_landscape(d1, LandscapeSpec(0, 2, 1, 3)).values, [[0, 1, 0]])
    ex2 = np.array_equal(
        sample_landscape(d2, LandscapeSpec(0, 2, 2, 5)).values, [[0, 0.5, 1, 0.5, 0], [0, 0.5, 0, 0, 0]]
    )
    ok = bad == 0 and ex1 and ex2
    acceptance_report(2, ok, f"{bad}/200 diagrams violate ordering; hand examples match: {ex1 and ex2}")
    assert ok


def test_3_stability(acceptance_report):
    rng = np.random.default_rng(3)
    spec = LandscapeSpec(0.0, 5.0, 5, 10)
    worst = 0.0
    for i in range(200):
        n = int(rng.integers(2, 65))
        # half the signals are integer-valued so ties and plateaus are exercised
        s = rng.integers(0, 6, n).astype(float) if i % 2 else rng.uniform(-1, 6, n)
        e = rng.uniform(-0.01, 0.01, n)
        e *= 0.01 / np.max(np.abs(e))
        a = sample_landscape(compute_pairs(s), spec).values
        b = sample_landscape(compute_pairs(s + e), spec).values
        worst = max(worst, float(np.max(np.abs(a - b))))
    ok = worst <= 0.01 + 1e-9
    acceptance_report(3, ok, f"max entry change {worst:.6f} for ||e||_inf = 0.01 (limit 0.01 + 1e-9)")
    assert ok


def test_4_gradient_checks(acceptance_report):
    start = time.perf_counter()
    lspec = LandscapeSpec(0.0, 2.0, 3, 6)
    layer = PersistenceLayerSpec(lspec, 12)
    rng = np.random.default_rng(11)
    pers_errors = []
    while len(pers_errors) < 5:
        x = rng.uniform(-0.5, 2.5, size=(1, 2, 36))
        if not all(is_generic(x[0, u, s * 12 : (s + 1) * 12], lspec) for u in range(2) for s in range(3)):
            continue
        out, cache = persistence_forward(x, layer)
        up = rng.normal(size=out.shape)
        g = persistence_backward(up, cache)
        numeric = central_difference(lambda v: float(np.sum(up * persistence_forward(v, layer)[0])), x, 1e-5)
        pers_errors.append(rel_error(g, numeric))

    e2e_worst = 0.0
    for seed in range(3):
        net = Network.initialize(tiny_pcnn_spec(), seed)
        r = np.random.default_rng(50 + seed)
        for name, p in net.params.items():
            if name.endswith(".bias"):
                net.params[name] = r.normal(0, 0.1, p.shape)
        x = r.normal(size=(2, 3, 35))
        errors = end_to_end_errors(net, x, np.array([[1.0, 0.0], [0.0, 1.0]]))
        e2e_worst = max(e2e_worst, max(errors.values()))
    elapsed = time.perf_counter() - start
    ok = max(pers_errors) <= 1e-4 and e2e_worst <= 1e-3 and elapsed < 60
    acceptance_report(
        4, ok,
        f"persistence layer rel err {max(pers_errors):.1e} (<=1e-4), tiny PCNN end-to-end {e2e_worst:.1e} "
        f"(<=1e-3), {elapsed:.1f}s (limit 60s)",
    )
    assert ok


# -- criteria 5 and 6 share the trained peak-count model ---------------------

PEAK_TASK = SyntheticConfig(num_clips=700, length=256, num_channels=1, max_peaks=5, noise_std=0.05,
                            rng_seed=7, split_sizes=(500, 0, 200))
ARCH = dict(early=((8, 1, 1),), segment_length=256, late_hidden=((64, 1, 1),), epochs=50, batch_size=16,
            learning_rate=0.01, dropout_rate=0.5, random_state=0)


@pytest.fixture(scope="module")
def peak_task():
    ds = generate_synthetic(PEAK_TASK)
    tr, te = ds.split("train"), ds.split("test")
    start = time.perf_counter()
    pnn = PersistentTagger(branch="pnn", **ARCH).fit(tr.X, tr.Y)
    return ds, tr, te, pnn, time.perf_counter() - start


def test_5_peak_count_task(peak_task, acceptance_report):
    _, tr, te, pnn, pnn_seconds = peak_task
    pnn_report = evaluate(pnn.predict_proba(te.X), te.Y)
    start = time.perf_counter()
    cnn = PersistentTagger(branch="cnn", middle=(32, 8, 32), **ARCH).fit(tr.X, tr.Y)
    cnn_seconds = time.perf_counter() - start
    cnn_report = evaluate(cnn.predict_proba(te.X), te.Y)
    total = pnn_seconds + cnn_seconds
    auc = pnn_report["perclass_auc"]
    ok = auc >= 0.95 and total < 600
    acceptance_report(
        5, ok,
        f"PNN per-class AUC {auc:.4f} (>=0.95; {pnn_report['undefined_perclass_auc']} always-on tag excluded) "
        f"in {pnn_seconds:.0f}s; CNN baseline per-class AUC {cnn_report['perclass_auc']:.4f} "
        f"in {cnn_seconds:.0f}s; total {total:.0f}s (limit 600s)",
    )
    assert ok


def test_6_correlation_analog(peak_task, acceptance_report):
    _, _, te, pnn, _ = peak_task
    norm = pnn.normalizer_
    out = landscape_activity_correlation(pnn.network_, te, transform=lambda x: norm.transform([x])[0])
    r5 = out["coefficients"][4]
    ok = r5 is not None and r5 >= 0.9
    shown = ", ".join("undef" if r is None else f"{r:.3f}" for r in out["coefficients"])
    acceptance_report(6, ok, f"r(k=5) = {r5 if r5 is None else round(r5, 4)} (>=0.9); all k: [{shown}]")
    assert ok


def test_7_metrics_oracle(acceptance_report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        s = np.round(rng.random((50, 50)), 2)  # coarse scores so ties occur
        y = (rng.random((50, 50)) < rng.uniform(0.05, 0.6)).astype(int)
        r = evaluate(s, y)
        for axis, auc_key, ap_key in ((0, "perclass_auc", "perclass_map"), (1, "perclip_auc", "perclip_map")):
            cols = [(s[:, j], y[:, j]) for j in range(50)] if axis == 0 else [(s[i], y[i]) for i in range(50)]
            aucs = [mann_whitney_oracle(a, b) for a, b in cols if 0 < b.sum() < b.size]
            aps = [ap_oracle(list(a), list(b)) for a, b in cols if b.sum() > 0]
            worst = max(worst, abs(r[auc_key] - np.mean(aucs)), abs(r[ap_key] - np.mean(aps)))
        tag_aucs = [mann_whitney_oracle(s[:, j], y[:, j]) if 0 < y[:, j].sum() < 50 else np.nan for j in range(50)]
        worst = max(worst, float(np.nanmax(np.abs(np.array(r["per_tag_auc"]) - tag_aucs))))
    ok = worst <= 1e-12
    acceptance_report(7, ok, f"max deviation from pair-counting / direct AP oracle {worst:.1e} on 100 50x50 tables")
    assert ok


def test_8_train_determinism(tmp_path, acceptance_report):
    assert main(["generate", str(tmp_path / "data"), "--num-clips", "60", "--seed", "1"]) == 0
    cfg = {
        "variant": "pcnn", "early": [[4, 4, 2]], "middle": [8, 1, 16],
        "persistence": {"segment_length": 16}, "late_hidden": [[16, 1, 1]],
        "train": {"epochs": 3, "seed": 42}, "data": {"manifest": str(tmp_path / "data" / "manifest.csv")},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    for run in ("a", "b"):
        assert main(["train", str(tmp_path / "cfg.json"), "--output-dir", str(tmp_path / run)]) == 0
    same = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("model.bin", "model_best.bin", "metrics.csv")
    )
    acceptance_report(8, same, f"two seeded train runs byte-identical: {same}")
    assert same


def test_9_architecture_arithmetic(acceptance_report):
    spec = RunConfig().network_spec(128, 50)
    net = Network.initialize(spec, 0)
    x = np.random.default_rng(0).normal(size=(1, 128, 1288))
    _, conv_out, pers_out, _ = net.forward_mid(x)
    mid, _ = concat_forward(conv_out, pers_out)
    ok = pers_out.shape[1] == 3200 and conv_out.shape[1] == 3200 and mid.shape[1] == 6400
    acceptance_report(
        9, ok,
        f"128x1288 input -> persistence {pers_out.shape[1]} ch, middle {conv_out.shape[1]} ch, "
        f"concatenated {mid.shape[1]} ch over {mid.shape[2]} steps",
    )
    assert ok
