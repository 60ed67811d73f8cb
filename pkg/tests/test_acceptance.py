"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import hashlib
import math
import subprocess
import sys
import textwrap
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
import torch

import oracles
from tempograph.cli import main
from tempograph.datasets import planted_community_graph, random_temporal_graph
from tempograph.generate import generate_er, generate_tgae
from tempograph.graph import StaticSnapshot, TemporalGraph
from tempograph.metrics import graph_statistic
from tempograph.model import TgaeConfig, TgaeModel, TrainConfig, batch_loss, train
from tempograph.motifs import count_temporal_motifs
from tempograph.nn import grad
from tempograph.report import evaluate
from tempograph.sampling import (
    SamplingConfig,
    batches_per_epoch,
    build_computation_graphs,
    derive_rng,
    sample_ego_graphs,
    sample_initial_nodes,
)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def say(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")

    return say


def _snapshot(n, pairs):
    src = np.array([a for a, _ in pairs], dtype=np.int64) + 1
    dst = np.array([b for _, b in pairs], dtype=np.int64) + 1
    return StaticSnapshot(n, src, dst)


def test_01_metric_oracles(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = []
    for i in range(100):
        n = int(rng.integers(1, 51))
        p = float(rng.uniform(0.02, 0.4))
        A = np.triu(rng.random((n, n)) < p, 1)
        pairs = list(zip(*np.nonzero(A)))
        s = _snapshot(n, pairs)
        B = oracles.simple_adjacency(n, pairs)
        expect = oracles.enumerate_counts(B)
        sizes = oracles.components(B)
        expect["lcc"] = max(sizes)
        expect["n-components"] = len(sizes)
        for metric, value in expect.items():
            if graph_statistic(s, metric) != value:
                bad.append((i, metric))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    verdict(1, ok, f"100 graphs, mismatches={len(bad)}, {elapsed:.2f}s (limit 10s)")
    assert not bad
    assert elapsed < 10


def test_02_motif_oracle(verdict):
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(50):
        g = oracles.random_temporal_graph(rng, n_max=8, T_max=8, m_max=200)
        delta = int(rng.integers(0, g.T + 1))
        bad += not np.array_equal(count_temporal_motifs(g, delta).counts, oracles.naive_motif_counts(g, delta))
    cyclic = TemporalGraph(3, 3, [1, 2, 3], [2, 3, 1], [1, 2, 3])
    h = count_temporal_motifs(cyclic, 2)
    cyc_ok = h.total == 1 and h.as_dict()["counts"]["01-12-20"] == 1
    verdict(2, bad == 0 and cyc_ok, f"50 graphs, mismatches={bad}; cyclic triangle instances={h.total}")
    assert bad == 0
    assert cyc_ok


def _relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    # max-norm error scaled by the larger max-norm of the two gradients
    scale = max(a.abs().max().item(), b.abs().max().item(), 1e-12)
    return (a - b).abs().max().item() / scale


def test_03_gradient_check(verdict):
    g = random_temporal_graph(10, 2, 24, seed=3)
    cfg = TgaeConfig(n=10, T=2, d_in=5, d_enc=4, d_lat=3, mlp_hidden=4, h_tga=2)
    m = TgaeModel(cfg, seed=1)
    centers = [g.temporal_node(i) for i in range(g.num_temporal_nodes)]
    stack = build_computation_graphs(sample_ego_graphs(g, centers, cfg.k, cfg.th, 0, ("gc",)), cfg.k)

    def loss():
        return batch_loss(m, g, stack, torch.Generator().manual_seed(11))[0]

    names, params = zip(*m.named_parameters())
    analytic = grad(loss(), params)
    h = 1e-5
    worst = {}
    with torch.no_grad():
        for name, p, a in zip(names, params, analytic):
            fd = torch.zeros_like(p)
            flat, out = p.view(-1), fd.view(-1)
            for j in range(flat.numel()):
                orig = flat[j].item()
                flat[j] = orig + h
                up = loss().item()
                flat[j] = orig - h
                down = loss().item()
                flat[j] = orig
                out[j] = (up - down) / (2 * h)
            worst[name] = _relative_error(a, fd)
    top = max(worst, key=worst.get)
    ok = all(e < 1e-4 for e in worst.values())
    verdict(3, ok, f"{len(worst)} tensors, max relative error {worst[top]:.2e} ({top}), limit 1e-4")
    assert ok, worst


def test_04_initial_node_distribution(verdict):
    # node 1 touches nodes 2 and 3: temporal degrees [2, 1, 1]
    g = TemporalGraph(3, 1, [1, 1], [2, 3], [1, 1])
    cfg = SamplingConfig(n_s=100_000, seed=0)
    draws = sample_initial_nodes(g, cfg, derive_rng(0, "accept"))
    N = len(draws)
    counts = np.bincount([v.node - 1 for v in draws], minlength=3)
    p = np.array([0.5, 0.25, 0.25])
    z = np.abs(counts - N * p) / np.sqrt(N * p * (1 - p))
    ok = bool((z <= 3).all())
    verdict(4, ok, f"frequencies {np.round(counts / N, 4).tolist()}, max |z|={z.max():.2f} (limit 3)")
    assert ok


def test_05_steps_per_epoch(verdict, monkeypatch):
    import tempograph.model as mod

    calls = []
    real = mod.sample_initial_nodes
    monkeypatch.setattr(mod, "sample_initial_nodes", lambda *a, **k: calls.append(1) or real(*a, **k))
    rng = np.random.default_rng(5)
    bad = []
    for _ in range(10):
        n, T, n_s = int(rng.integers(2, 15)), int(rng.integers(1, 5)), int(rng.integers(1, 40))
        g = random_temporal_graph(n, T, 3 * n, seed=int(rng.integers(1000)))
        calls.clear()
        train(g, TgaeConfig(n=n, T=T, d_in=3, d_enc=2, d_lat=2, mlp_hidden=3, k=1, h_tga=1), TrainConfig(epochs=1, n_s=n_s))
        expect = math.ceil(n * T / n_s)
        if len(calls) != expect or batches_per_epoch(n, T, n_s) != expect:
            bad.append((n, T, n_s, len(calls), expect))
    verdict(5, not bad, f"10 (n, T, n_s) combinations, mismatches={bad}")
    assert not bad


def test_06_conservation(verdict):
    datasets = {
        "planted": planted_community_graph(n=30, T=3, communities=3, triangles=4, noise=3, seed=2),
        "random": random_temporal_graph(25, 4, 120, seed=8),
        "sparse": random_temporal_graph(40, 2, 30, seed=9, self_loops=True),
    }
    problems = []
    for name, g in datasets.items():
        model, _ = train(g, TgaeConfig(n=g.n, T=g.T, d_in=8, d_enc=6, d_lat=4, mlp_hidden=6), TrainConfig(epochs=2, n_s=16))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            gens = [generate_tgae(model, g, seed=s) for s in range(2)]
        gens.append(generate_er(g.n, g.snapshot_counts(), derive_rng(0, "er")))
        for h in gens:
            triples = h.edge_tuples()
            if h.m != g.m or len(set(triples)) != len(triples):
                problems.append(f"{name}: m={h.m} vs {g.m}, distinct={len(set(triples))}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = evaluate(g, [g])
        for metric, v in rep["metrics"].items():
            if v["f_avg"] not in (0, None) or v["f_med"] not in (0, None):
                problems.append(f"{name}: self f({metric})={v['f_avg']}")
        if rep["mmd"] is None or rep["mmd"] > 1e-12:
            problems.append(f"{name}: self MMD={rep['mmd']}")
    verdict(6, not problems, f"3 datasets, problems={problems}")
    assert not problems


# -- end-to-end quality and the walk-variant ablation share one set of trained models ----------

N_GEN = 10
SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def quality_runs():
    g = planted_community_graph()
    runs = {}
    for variant in ("full", "g"):
        for seed in SEEDS:
            t0 = time.perf_counter()
            model, _ = train(g, TgaeConfig.for_variant(variant, n=g.n, T=g.T), TrainConfig(epochs=200, n_s=64, seed=seed))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                gens = [generate_tgae(model, g, seed=100 * seed + i) for i in range(N_GEN)]
                ers = [generate_er(g.n, g.snapshot_counts(), derive_rng(seed, "er", i)) for i in range(N_GEN)]
                tgae, er = evaluate(g, gens), evaluate(g, ers)
            runs[variant, seed] = {
                "seconds": time.perf_counter() - t0,
                "md": tgae["metrics"]["mean-degree"]["f_avg"],
                "tri": tgae["metrics"]["triangle"]["f_avg"],
                "tri_er": er["metrics"]["triangle"]["f_avg"],
                "mmd": tgae["mmd"],
                "mmd_er": er["mmd"],
            }
    return runs


@pytest.mark.slow
def test_07_end_to_end_quality(verdict, quality_runs):
    rows = [quality_runs["full", s] for s in SEEDS]
    elapsed = sum(r["seconds"] for r in rows)

    def good(r):
        return r["md"] <= 0.2 and r["tri"] < r["tri_er"] and r["mmd"] < r["mmd_er"]

    # best-of-3: the seed with the lowest motif MMD must meet every bound
    best = min(rows, key=lambda r: r["mmd"])
    ok = good(best) and elapsed < 600
    detail = "; ".join(
        f"seed {s}: md={r['md']:.3f} tri={r['tri']:.3f}/{r['tri_er']:.3f} mmd={r['mmd']:.4f}/{r['mmd_er']:.4f}"
        for s, r in zip(SEEDS, rows)
    )
    verdict(7, ok, f"{detail}; total {elapsed:.0f}s (limit 600s)")
    assert good(best)
    assert elapsed < 600


@pytest.mark.slow
def test_08_walk_variant_ablation(verdict, quality_runs):
    pairs = [(quality_runs["g", s]["mmd"], quality_runs["full", s]["mmd"]) for s in SEEDS]
    wins = sum(walk >= full for walk, full in pairs)
    detail = ", ".join(f"seed {s}: walk {w:.4f} vs full {f:.4f}" for s, (w, f) in zip(SEEDS, pairs))
    verdict(8, wins >= 2, f"walk MMD >= full in {wins}/3 seeds ({detail})")
    assert wins >= 2


def _sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_09_determinism(verdict, tmp_path):
    g = planted_community_graph(n=24, T=3, communities=3, triangles=3, noise=2, seed=4)
    data = tmp_path / "data.txt"
    data.write_text("".join(f"{a} {b} {t}\n" for a, b, t in g.edge_tuples()))
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'dataset = "{data}"\nseed = 5\nepochs = 3\nn_s = 16\nd_in = 8\nd_enc = 6\nd_lat = 4\n')
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["train", "-c", str(cfg), "--out-dir", str(out)]) == 0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            assert main(["generate", "--checkpoint", str(out / "model.ckpt"), "--dataset", str(data),
                         "--out", str(out / "gen.txt"), "--seed", "5", "--num-graphs", "2"]) == 0
            assert main(["evaluate", str(data), str(out / "gen_1.txt"), str(out / "gen_2.txt"),
                         "--report", str(out / "report.json"), "--seed", "5"]) == 0
        paths = [out / name for name in ("loss.csv", "model.ckpt", "gen_1.txt", "gen_2.txt", "report.json")]
        paths += sorted((out / "series").iterdir())
        digests.append({str(p.relative_to(out)): _sha(p) for p in paths})
    ok = digests[0] == digests[1]
    verdict(9, ok, f"{len(digests[0])} artifacts compared byte for byte")
    assert ok


SCALE_SCRIPT = textwrap.dedent(
    """
    import json, resource, time, warnings
    from tempograph.datasets import random_temporal_graph
    from tempograph.generate import generate_tgae
    from tempograph.model import TgaeConfig, TgaeModel
    from tempograph.report import evaluate
    warnings.simplefilter("ignore")
    g = random_temporal_graph(10_000, 20, 100_000, seed=0)
    t0 = time.perf_counter()
    h = generate_tgae(TgaeModel(TgaeConfig(n=g.n, T=g.T), seed=0), g, seed=0)
    t1 = time.perf_counter()
    rep = evaluate(g, [h])
    t2 = time.perf_counter()
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    print(json.dumps({"generate": t1 - t0, "evaluate": t2 - t1, "peak": peak, "m": h.m}))
    """
)


@pytest.mark.slow
def test_10_scale_smoke(verdict):
    proc = subprocess.run([sys.executable, "-c", SCALE_SCRIPT], capture_output=True, text=True, timeout=900)
    assert proc.returncode == 0, proc.stderr
    import json

    res = json.loads(proc.stdout.strip().splitlines()[-1])
    total = res["generate"] + res["evaluate"]
    ok = total < 300 and res["peak"] < 4 * 2**30 and res["m"] == 100_000
    verdict(10, ok, f"generate {res['generate']:.1f}s + evaluate {res['evaluate']:.1f}s = {total:.1f}s (limit 300s), "
                    f"peak RSS {res['peak'] / 2**30:.2f} GiB (limit 4 GiB)")
    assert res["m"] == 100_000
    assert total < 300
    assert res["peak"] < 4 * 2**30
