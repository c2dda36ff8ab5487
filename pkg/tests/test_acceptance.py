"""End-to-end acceptance checks; each prints one PASS/FAIL line.

The reference run trains 20 creators x 5 seeds with the default
configuration, so this module takes several minutes.
"""
import contextlib
import io
import itertools
import json
import shutil
import time

import numpy as np
import pytest

from qbar import evaluation as ev
from qbar import peqad, pipeline, scoring
from qbar.cli import main
from qbar.errors import TemporalLeak
from qbar.persistence import load_manifest, load_model, read_embedding, save_model
from qbar.statevector import AnsatzConfig, StateVector, run_ansatz

from .conftest import ACCEPTANCE_LINES, random_state
from .oracles import average_precision, best_threshold_f1, dense_ansatz, f1_exact
from .oracles import fd_gradient_extended

pytestmark = pytest.mark.acceptance

SEEDS = [0, 1, 2, 3, 4]


def record(n, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def cli(*argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main([*argv, "--quiet"])
    assert code == 0, f"qbar {' '.join(argv)} exited {code}"
    return [json.loads(l) for l in buf.getvalue().splitlines() if l.strip()]


def full_pipeline(out, config=None, seeds=SEEDS):
    extra = ["--config", str(config)] if config else []
    seed_arg = ["--seeds", ",".join(map(str, seeds))]
    start = time.perf_counter()
    gen = cli("gen", "--out", str(out), *extra)
    train = cli("train", "--out", str(out), *extra, *seed_arg)
    train_time = time.perf_counter() - start
    cal = cli("calibrate", "--out", str(out), *extra, *seed_arg)
    evl = cli("eval", "--out", str(out), *extra, *seed_arg)
    return {"out": out, "gen": gen, "train": train, "calibrate": cal, "eval": evl,
            "train_time": train_time}


@pytest.fixture(scope="session")
def reference_run(tmp_path_factory):
    return full_pipeline(tmp_path_factory.mktemp("reference"))


@pytest.fixture(scope="session")
def null_run(tmp_path_factory):
    """s = 0 injection and no splicing: mutants are indistinguishable from normals."""
    root = tmp_path_factory.mktemp("null")
    cfg = root / "null.json"
    cfg.write_text(json.dumps({"gen": {"inject_strength": 0.0, "splice_permute": False,
                                       "splice_delete_fraction": 0.0}}))
    return full_pipeline(root, cfg, seeds=[0])


def test_criterion_01_parameter_budget(reference_run):
    start = time.perf_counter()
    count = AnsatzConfig().parameter_count
    peqad.init_theta(AnsatzConfig(), 0)
    elapsed = time.perf_counter() - start
    printed = {r["parameter_count"] for r in reference_run["train"]}
    ok = count == 240 and printed == {240} and elapsed < 1.0
    record(1, "parameter budget", ok,
           f"AnsatzConfig()={count}, cmd_train printed {sorted(printed)}, {elapsed:.4f}s")


def test_criterion_02_unitarity():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    cfg = AnsatzConfig()
    worst_norm = 0.0
    for _ in range(100):
        theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
        out = run_ansatz(StateVector(random_state(rng, 12)), cfg, theta)
        worst_norm = max(worst_norm, abs(np.linalg.norm(out.amplitudes) - 1))
    worst_u = 0.0
    for n in (1, 2, 3):
        small = AnsatzConfig(n, 10)
        for _ in range(5):
            theta = rng.uniform(-np.pi, np.pi, small.parameter_count)
            u = np.column_stack([run_ansatz(StateVector.basis(n, i), small, theta).amplitudes
                                 for i in range(2 ** n)])
            worst_u = max(worst_u, np.max(np.abs(u.conj().T @ u - np.eye(2 ** n))))
    elapsed = time.perf_counter() - start
    ok = worst_norm <= 1e-10 and worst_u <= 1e-10 and elapsed < 10
    record(2, "unitarity and normalization", ok,
           f"max |norm-1| {worst_norm:.2e} over 100 12-qubit runs, "
           f"max |U^H U - I| {worst_u:.2e} for n<=3, {elapsed:.2f}s")


def test_criterion_03_gradient_fidelity():
    start = time.perf_counter()
    cfg = AnsatzConfig(4, 2)
    worst = 0.0
    for trial in range(20):
        rng = np.random.default_rng(100 + trial)
        theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
        states = [StateVector(random_state(rng, 4)) for _ in range(5)]
        mean_in = peqad.mean_state(states)
        center = peqad.init_center(states, cfg, peqad.init_theta(cfg, trial))
        _, grad = peqad.loss_and_grad(mean_in, center, cfg, theta, 1e-4)
        # difference quotients in extended precision so oracle rounding stays far below 1e-5
        fd = fd_gradient_extended(mean_in, center.amplitudes, 4, 2, theta, 1e-4, eps=1e-5)
        worst = max(worst, float(np.max(np.abs(grad - fd) / np.abs(fd))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-5 and elapsed < 30
    record(3, "gradient fidelity", ok,
           f"max relative error {worst:.2e} over 20 configs x 16 components, {elapsed:.2f}s")


def test_criterion_04_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        layers = int(rng.integers(1, 5))
        cfg = AnsatzConfig(2, layers)
        theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
        psi = random_state(rng, 2)
        out = run_ansatz(StateVector(psi), cfg, theta).amplitudes
        worst = max(worst, np.max(np.abs(out - dense_ansatz(2, layers, theta) @ psi)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and elapsed < 5
    record(4, "dense oracle equivalence", ok,
           f"max amplitude error {worst:.2e} over 50 cases, {elapsed:.3f}s")


def test_criterion_05_training_behavior(reference_run):
    rows = reference_run["train"]
    seed0 = [r for r in rows if r["seed"] == 0]
    halved = sum(r["final_loss"] <= 0.5 * r["initial_loss"] for r in seed0)
    ratios = np.array([r["loss_ratio"] for r in rows])
    slowest = max(r["wall_time"] for r in rows)
    total = reference_run["train_time"]
    ok = halved >= 18 and slowest < 60 and total < 3600
    record(5, "training behavior", ok,
           f"{halved}/20 creators reach final <= 0.5 x initial (seed 0); loss ratio over "
           f"100 runs min {ratios.min():.4f} median {np.median(ratios):.4f} max {ratios.max():.4f}; "
           f"slowest creator {slowest:.1f}s; 20 creators x 5 seeds in {total:.0f}s")


def _quant_gap(run):
    manifest = load_manifest(run["out"] / "data" / "manifest.json")
    wins = 0
    for cid in manifest.creator_ids:
        normal, mutant = [], []
        for seed in SEEDS:
            det = load_model(run["out"] / "models" / f"seed{seed}" / f"{cid}.json")
            _, labels, raw = pipeline.split_scores(det, manifest, "test")
            for y, (q, _) in zip(labels, raw):
                (mutant if y else normal).append(q)
        wins += np.mean(mutant) > np.mean(normal)
    return wins


def test_criterion_06_detection_power(reference_run, null_run):
    summary = json.loads((reference_run["out"] / "eval" / "summary.json").read_text())
    aupr = summary["calibrated"]["mean"]["aupr"]
    wins = _quant_gap(reference_run)
    null = json.loads((null_run["out"] / "eval" / "summary.json").read_text())
    null_aupr = null["calibrated"]["mean"]["aupr"]
    prevalence = 8 / 12
    ok = aupr >= 0.85 and wins >= 18 and abs(null_aupr - prevalence) <= 0.1
    record(6, "detection power", ok,
           f"pooled AUPR {aupr:.4f} (mean of 5 seeds, need >= 0.85); "
           f"mean S_quant mutants > normals for {wins}/20 creators; "
           f"null dataset AUPR {null_aupr:.4f} vs prevalence {prevalence:.4f}")


def test_criterion_07_calibration_optimality():
    rng = np.random.default_rng(7)
    exact = 0
    for trial in range(20):
        n = int(rng.integers(6, 40))
        labels = rng.random(n) < 0.4
        labels[0], labels[1] = True, False
        rows = [(float(q), float(d), bool(y))
                for q, d, y in zip(rng.gamma(2.0, size=n) + labels, rng.normal(size=n), labels)]
        norms = (scoring.fit_normalizer([r[0] for r in rows[: n // 2]]),
                 scoring.fit_normalizer([r[1] for r in rows[: n // 2]]))
        cfg = scoring.calibrate(rows, norms)
        best = max(best_threshold_f1([scoring.s_final(q, d, norms, g) for q, d, _ in rows],
                                     list(labels)) for g in scoring.GAMMA_GRID)
        exact += cfg.validation_f1 == float(best)
    record(7, "calibration optimality", exact == 20,
           f"{exact}/20 random validation sets match the exhaustive re-sweep exactly")


def test_criterion_08_metric_correctness():
    prf_cases = ap_cases = 0
    prf_ok = ap_ok = True
    for n in range(1, 9):
        rng = np.random.default_rng(n)
        score_sets = [rng.permutation(n).astype(float), rng.integers(0, 3, n).astype(float),
                      np.zeros(n)]
        for labels in itertools.product([0, 1], repeat=n):
            for preds in itertools.product([0, 1], repeat=n):
                got = ev.prf1(ev.confusion(labels, preds))
                want = f1_exact(labels, preds)
                prf_ok &= all(abs(g - float(w)) <= 1e-15 for g, w in zip(got, want))
                prf_cases += 1
            if any(labels):
                for scores in score_sets:
                    want = float(average_precision(labels, list(scores)))
                    ap_ok &= abs(ev.aupr(labels, scores) - want) <= 1e-15
                    ap_cases += 1
    worked = ev.aupr([1, 0, 1], [0.9, 0.8, 0.7])
    ok = prf_ok and ap_ok and abs(worked - 0.8333333333333334) <= 1e-12
    record(8, "metric correctness", ok,
           f"prf1 {prf_cases} label/prediction pairs, aupr {ap_cases} cases, "
           f"worked example AP {worked:.12f}")


def _tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_09_determinism(reference_run, tmp_path):
    ref = reference_run["out"]
    mismatches = []
    # regenerate the reference dataset and retrain two creators from scratch
    cli("gen", "--out", str(tmp_path))
    a, b = _tree(ref / "data"), _tree(tmp_path / "data")
    mismatches += [str(k) for k in a if a[k] != b.get(k)]
    for cid in ("c000", "c013"):
        cli("train", "--out", str(tmp_path), "--creator", cid, "--seeds", "0,3")
        cli("calibrate", "--out", str(tmp_path), "--creator", cid, "--seeds", "0,3")
        for seed in (0, 3):
            for ext in (".json", ".bin"):
                rel = f"models/seed{seed}/{cid}{ext}"
                if (ref / rel).read_bytes() != (tmp_path / rel).read_bytes():
                    mismatches.append(rel)
    # re-evaluate the reference checkpoints into a fresh directory
    shutil.copytree(ref / "models", tmp_path / "models", dirs_exist_ok=True)
    cli("eval", "--out", str(tmp_path))
    for name in ("results.csv", "pr_curve.csv", "summary.json"):
        if (ref / "eval" / name).read_bytes() != (tmp_path / "eval" / name).read_bytes():
            mismatches.append(f"eval/{name}")
    # in-memory detector vs its saved and reloaded copy, on every test video of one creator
    manifest = load_manifest(ref / "data" / "manifest.json")
    det, _ = pipeline.train_detector(manifest, "c000", peqad.TrainConfig(seed=0))
    det = pipeline.calibrate_detector(det, manifest)
    save_model(det, tmp_path / "roundtrip.json")
    if (tmp_path / "roundtrip.bin").read_bytes() != (ref / "models/seed0/c000.bin").read_bytes():
        mismatches.append("in-process checkpoint vs cmd_train checkpoint")
    back = load_model(tmp_path / "roundtrip.json")
    ulp = 0
    for e in manifest.videos_for("c000", "test"):
        fused = det.fuse(read_embedding(manifest.resolve(e["path"])).segments)
        s1, s2 = det.score(fused).s_final, back.score(fused).s_final
        ulp = max(ulp, abs(int(np.float64(s1).view(np.int64)) - int(np.float64(s2).view(np.int64))))
    ok = not mismatches and ulp == 0
    record(9, "determinism and persistence", ok,
           f"{len(a)} dataset files, 8 retrained checkpoint files and 3 eval files compared; "
           f"mismatches {mismatches or 'none'}; round-trip score change {ulp} ULP")


def test_criterion_10_protocol(reference_run, tmp_path):
    ref = reference_run["out"]
    manifest = load_manifest(ref / "data" / "manifest.json")
    ordered = all(
        max(v["index"] for v in manifest.videos_for(c, "train"))
        < min(v["index"] for v in manifest.videos_for(c, "test"))
        for c in manifest.creator_ids)
    doc = json.loads((ref / "data" / "manifest.json").read_text())
    victim = next(v for v in doc["videos"] if v["split"] == "train")
    victim["index"] = 10_000
    bad = ref / "data" / "corrupted.json"
    bad.write_text(json.dumps(doc))
    try:
        load_manifest(bad)
        rejected = False
    except TemporalLeak:
        rejected = True
    finally:
        bad.unlink()
    summary = json.loads((ref / "eval" / "summary.json").read_text())["calibrated"]
    header = (ref / "eval" / "results.csv").read_text().splitlines()[0].split(",")
    shape = (summary["seeds"] == SEEDS and len(summary["per_creator_fpr_mean"]) == 20
             and "fpr" in header and set(summary["std"]) == set(ev.METRICS))
    ok = ordered and rejected and shape
    record(10, "protocol conformance", ok,
           f"train predates test for all creators: {ordered}; corrupted manifest rejected: "
           f"{rejected}; report has per-creator FPR and mean/std over {len(summary['seeds'])} "
           f"seeds: {shape} (F1 {summary['mean']['f1']:.3f} +/- {summary['std']['f1']:.3f}, "
           f"FPR {summary['mean']['fpr']:.3f})")
