"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line, listed again in the terminal summary.
The two end-to-end checks are marked ``slow`` (about seven minutes together).
"""
import time

import numpy as np
import pytest
import sympy as sp

from conftest import brute_A, brute_ap, central_diff, record, rel_err, tiny_problem
from xmmr import base_net as bn
from xmmr import pipeline as pl
from xmmr import retrieval as rt
from xmmr import trainer as tr
from xmmr.graph import SimilarityMatrix, unlabeled_similarity
from xmmr.io_formats import ingest
from xmmr.losses import (ContrastiveConfig, QuadrupletConfig, quadruplet_grad, quadruplet_loss,
                         semi_supervised_loss)
from xmmr.sampler import PairSelection, as_quadruplets, is_valid_quadruplet, sample_quadruplets


def _quad_arg(v, beta):
    return (2 * np.sum((v[0] - v[1]) ** 2) - np.sum((v[0] - v[3]) ** 2)
            - np.sum((v[2] - v[1]) ** 2) + beta)


def _symbolic_quad_check():
    d = 3
    ip, tp, im, tm = (sp.Matrix(sp.symbols(f"{n}0:{d}")) for n in ("ip", "tp", "im", "tm"))
    sq = lambda v: (v.T * v)[0, 0]
    arg = 2 * sq(ip - tp) - sq(ip - tm) - sq(im - tp) + sp.Symbol("beta")
    claimed = [(ip, 2 * ip - 4 * tp + 2 * tm), (tp, 2 * tp - 4 * ip + 2 * im),
               (im, 2 * tp - 2 * im), (tm, 2 * ip - 2 * tm)]
    return all(sp.expand(sp.Matrix([sp.diff(arg, s) for s in v]) - c) == sp.zeros(d, 1)
               for v, c in claimed)


def test_quadruplet_gradient_fd():
    rng = np.random.default_rng(0)
    cfg = QuadrupletConfig(1.0)
    t0 = time.perf_counter()
    worst, n_active, done = 0.0, 0, 0
    while done < 1000:
        v = rng.normal(size=(4, 3)) * rng.uniform(0.2, 2.0)
        if abs(_quad_arg(v, 1.0)) < 1e-3:  # stay off the kink
            continue
        g = quadruplet_grad(*v, cfg)
        analytic = np.stack([g.grad_f[0], g.grad_g[0], g.grad_f[1], g.grad_g[1]])
        fd = central_diff(lambda: quadruplet_loss(*v, cfg), v, h=1e-5)
        worst = max(worst, rel_err(analytic, fd))
        n_active += g.count
        done += 1
    elapsed = time.perf_counter() - t0
    symbolic = _symbolic_quad_check()
    ok = worst <= 1e-5 and elapsed < 5.0 and symbolic and 0 < n_active < 1000
    record("quadruplet gradient vs finite differences", ok,
           f"max rel err {worst:.2e}, {n_active} active / 1000, {elapsed:.2f}s, "
           f"symbolic {'match' if symbolic else 'MISMATCH'}")
    assert ok


def test_contrastive_gradient_fd():
    rng = np.random.default_rng(1)
    cfg = ContrastiveConfig(1.0)
    worst, batches = 0.0, 0
    while batches < 25:
        n, m, d = 12, 6, 4
        F, G = rng.random((n, d)), rng.random((n, d))
        C = SimilarityMatrix((rng.random((m, m)) < 0.4).astype(np.uint8), "labeled_C")
        A = unlabeled_similarity(F[m:], G[m:], 2)
        k_l, k_u = 20, 12
        img = np.r_[rng.integers(0, m, k_l), rng.integers(m, n, k_u)]
        txt = np.r_[rng.integers(0, m, k_l), rng.integers(m, n, k_u)]
        pairs = PairSelection(img, txt, np.zeros(img.size, np.uint8),
                              np.r_[np.ones(k_l), np.zeros(k_u)].astype(np.uint8))
        sq = np.sum((F[img] - G[txt]) ** 2, axis=1)
        if np.min(np.abs(sq - cfg.margin_alpha)) < 1e-3:
            continue
        out = semi_supervised_loss(F, G, C, A, pairs, m, cfg)
        loss = lambda: semi_supervised_loss(F, G, C, A, pairs, m, cfg).loss_value
        worst = max(worst, rel_err(out.grad_f, central_diff(loss, F)),
                    rel_err(out.grad_g, central_diff(loss, G)))
        batches += 1
    ok = worst <= 1e-5
    record("contrastive gradient vs finite differences", ok, f"max rel err {worst:.2e} over 25 batches")
    assert ok


def test_end_to_end_gradient_fd():
    state, inputs, cfg = tiny_problem(seed=3, dim=4)
    sg = tr.step_grads(state, *inputs, cfg)
    loss = lambda: tr.step_grads(state, *inputs, cfg).total
    worst, count = 0.0, 0
    for pw, grads in ((state.image_pathway, sg.img), (state.text_pathway, sg.txt)):
        for name, layer in pw.layers():
            gw, gb = grads[name]
            worst = max(worst, rel_err(gw, central_diff(loss, layer.weight)),
                        rel_err(gb, central_diff(loss, layer.bias)))
            count += layer.weight.size + layer.bias.size
    ok = worst <= 1e-5 and sg.semi.loss_value > 0 and sg.quad.loss_value > 0
    record("end-to-end gradient (dims 4, batch 3)", ok, f"max rel err {worst:.2e} over {count} params")
    assert ok


def test_graph_oracle():
    rng = np.random.default_rng(2)
    mismatches = 0
    for i in range(50):
        n = int(rng.integers(1, 31))
        k = (1, 3, 5)[i % 3]
        Si, St = rng.normal(size=(n, 5)), rng.normal(size=(n, 5))
        if i % 5 == 0:  # quantized points to exercise ties
            Si, St = np.round(Si), np.round(St)
        A = unlabeled_similarity(Si, St, k).entries
        mismatches += int(not np.array_equal(A, brute_A(Si, St, k)))
    ok = mismatches == 0
    record("kNN graph vs brute-force OR rule", ok, f"{mismatches} mismatching batches of 50")
    assert ok


def test_map_oracle():
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        rel = rng.random(n) < rng.uniform(0.05, 0.7)
        order = rng.permutation(n)
        cut = int(rng.integers(1, 60))
        mismatches += rt.average_precision(order, rel) != brute_ap(rel[order])
        mismatches += rt.average_precision(order, rel, cut) != brute_ap(rel[order], cut)
    Qi, Qt = rng.normal(size=(80, 6)), rng.normal(size=(70, 6))
    li, lt = rng.integers(0, 4, 80), rng.integers(0, 4, 70)
    a, b = rt.evaluate(Qi, Qt, li, lt), rt.evaluate(Qi * 7.3, Qt * 7.3, li, lt)
    scale_ok = (rt.format_reports(a) == rt.format_reports(b)
                and all(np.array_equal(x.ap, y.ap) for x, y in zip(a, b)))
    ok = mismatches == 0 and scale_ok
    record("AP vs brute force, MAP scale invariance", ok,
           f"{mismatches} AP mismatches in 1000 lists, scaling x7.3 {'identical' if scale_ok else 'DIFFERS'}")
    assert ok


def test_quadruplet_sampler_validity():
    rng = np.random.default_rng(4)
    violations, total = 0, 0
    while total < 100_000:
        m = int(rng.integers(2, 65))
        labels = rng.integers(0, int(rng.integers(2, 11)), m)
        if np.unique(labels).size < 2:
            continue
        q = sample_quadruplets(labels, 1000, rng)
        violations += sum(not is_valid_quadruplet(x, labels) for x in as_quadruplets(q))
        total += q.shape[0]
    ok = violations == 0
    record("quadruplet sampler constraints", ok, f"{violations} violations in {total} quadruplets")
    assert ok


@pytest.fixture(scope="module")
def seed42_ablation(tmp_path_factory):
    """Full default ablation on the seed-42 synthetic benchmark, run once."""
    root = tmp_path_factory.mktemp("ablate")
    cfg = pl.load_config(env={})
    manifest = pl.run_synthgen(cfg, str(root / "data"))
    t0 = time.perf_counter()
    rows = pl.run_ablate(cfg, manifest, str(root / "work"))
    return rows, time.perf_counter() - t0


@pytest.mark.slow
def test_ablation_ordering(seed42_ablation):
    rows, seconds = seed42_ablation
    avg = {r.mode: r.average("all") for r in rows}
    ok = (avg["full"] >= avg["semi_only"] >= avg["base"]
          and avg["full"] >= avg["quad_only"] >= avg["base"]
          and avg["full"] - avg["base"] >= 0.05 and seconds <= 600)
    detail = ", ".join(f"{m} {v:.4f}" for m, v in avg.items()) + f"; {seconds:.0f}s"
    record("ablation ordering on seed-42 benchmark", ok, detail)
    assert ok


@pytest.mark.slow
def test_convergence_envelope(seed42_ablation):
    rows, _ = seed42_ablation
    full = next(r for r in rows if r.mode == "full")
    step = tr.plateau_step(full.result.report.total, window=500, tol=0.01)
    ok = step is not None and step < 5000
    record("full training plateaus within 5000 steps", ok, f"plateau at step {step}")
    assert ok


def _pipeline(root, cfg):
    manifest = pl.run_synthgen(cfg, str(root / "data"))
    work = str(root / "work")
    pl.run_pretrain(cfg, manifest, work)
    pl.run_train(cfg, manifest, work)
    pl.run_embed(cfg, work)
    pl.run_evaluate(cfg, manifest, work)
    return {name: (root / "work" / name).read_bytes()
            for name in (pl.BASE_CKPT, pl.METRIC_CKPT, pl.REPORT, pl.Q_IMG, pl.Q_TXT)}


def test_pipeline_determinism(tmp_path):
    cfg = pl.load_config(overrides={"optim.max_steps": "300"}, env={})
    a = _pipeline(tmp_path / "a", cfg)
    b = _pipeline(tmp_path / "b", cfg)
    same = [k for k in a if a[k] == b[k]]
    ok = len(same) == len(a)
    record("pipeline determinism (pretrain/train/embed/evaluate)", ok,
           f"{len(same)}/{len(a)} artifacts bitwise identical")
    assert ok


def test_base_net_descent(tmp_path):
    cfg = pl.load_config(env={})
    ds = ingest(pl.run_synthgen(cfg, str(tmp_path)))
    train = ds.rows("train")
    base = bn.pretrain(ds.x_img[train], ds.x_txt[train], pl.base_config(cfg))
    curves = {"gaussian RBM": base.img_dbn.layer1.recon_history,
              "replicated softmax": base.txt_dbn.layer1.recon_history,
              "bimodal AE": base.ae.loss_history}
    parts, ok = [], True
    for name, h in curves.items():
        first, last = float(np.mean(h[:10])), float(np.mean(h[-10:]))
        ok &= last < first and h[-1] < h[0]
        parts.append(f"{name} {first:.3f}->{last:.3f}")
    record("base network reconstruction descent", ok, ", ".join(parts))
    assert ok

