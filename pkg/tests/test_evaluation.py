import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbar import evaluation as ev
from qbar.errors import LengthMismatch, NoPositives, TooFewReports, UnknownCreator
from qbar.persistence import load_manifest

from .oracles import average_precision, f1_exact


def test_confusion_examples():
    c = ev.confusion([1, 0, 1, 1, 0, 0], [1, 1, 0, 1, 0, 0])
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 2, 1)
    c = ev.confusion([1, 0, 1], [1, 1, 1])
    assert c.fn == 0 and c.tn == 0
    c = ev.confusion(["anomaly", "normal"], ["anomaly", "normal"])
    assert c.fp == 0 and c.fn == 0
    with pytest.raises(LengthMismatch):
        ev.confusion([1], [1, 0])


def test_prf1_examples():
    p, r, f1 = ev.prf1(ev.ConfusionCounts(tp=7, fp=3, fn=2))
    assert p == 0.7 and abs(r - 7 / 9) < 1e-15 and abs(f1 - 14 / 19) < 1e-15
    assert round(r, 4) == 0.7778 and round(f1, 4) == 0.7368
    assert ev.prf1(ev.ConfusionCounts()) == (0.0, 0.0, 0.0)
    assert ev.prf1(ev.ConfusionCounts(tp=4, tn=5)) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("n", range(1, 9))
def test_prf1_exhaustive(n):
    # every label vector against a fixed set of prediction vectors
    preds_pool = list(itertools.product([0, 1], repeat=n))[:: max(1, 2 ** n // 16)]
    for labels in itertools.product([0, 1], repeat=n):
        for preds in preds_pool:
            got = ev.prf1(ev.confusion(labels, preds))
            want = f1_exact(labels, preds)
            assert all(abs(g - float(w)) <= 1e-15 for g, w in zip(got, want))


def test_aupr_examples():
    assert abs(ev.aupr([1, 0, 1], [0.9, 0.8, 0.7]) - 5 / 6) < 1e-15
    assert ev.aupr([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0
    with pytest.raises(NoPositives):
        ev.aupr([0, 0], [0.1, 0.2])


@pytest.mark.parametrize("labels", [l for l in itertools.product([0, 1], repeat=4) if any(l)])
def test_aupr_constant_scores_is_prevalence(labels):
    assert ev.aupr(labels, [0.3] * 4) == sum(labels) / 4
    for perm in itertools.permutations(range(4)):
        assert ev.aupr([labels[i] for i in perm], [0.3] * 4) == sum(labels) / 4


@pytest.mark.parametrize("n", range(1, 9))
def test_aupr_exhaustive_small(n):
    rng = np.random.default_rng(n)
    for labels in itertools.product([0, 1], repeat=n):
        if not any(labels):
            continue
        scores = list(rng.integers(0, 4, size=n).astype(float))
        assert abs(ev.aupr(labels, scores) - float(average_precision(labels, scores))) < 1e-15


@settings(max_examples=80)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 6)), min_size=1, max_size=20))
def test_aupr_order_invariant(rows):
    labels = [y for y, _ in rows]
    if not any(labels):
        return
    scores = [float(s) for _, s in rows]
    a = ev.aupr(labels, scores)
    assert a == ev.aupr(labels[::-1], scores[::-1])
    assert abs(a - float(average_precision(labels, scores))) < 1e-12
    assert 0.0 < a <= 1.0


def test_per_creator_fpr(small_dataset):
    m = load_manifest(small_dataset)
    test = {cid: m.videos_for(cid, "test") for cid in m.creator_ids}
    preds = {}
    c0, c1, c2 = m.creator_ids
    for e in test[c0]:
        preds[e["id"]] = e["label"] != "normal"
    for e in test[c1]:
        preds[e["id"]] = True
    normals = [e for e in test[c2] if e["label"] == "normal"]
    for e in test[c2]:
        preds[e["id"]] = e["label"] != "normal" or e is normals[0]
    out = ev.per_creator_fpr(m, preds)
    assert out == {c0: 0.0, c1: 1.0, c2: 1 / len(normals)}
    with pytest.raises(UnknownCreator):
        ev.per_creator_fpr(m, preds, ["zzz"])


def _report(seed, **metrics):
    pooled = dict.fromkeys(ev.METRICS, 0.5)
    pooled.update(metrics)
    return ev.EvalReport(seed, pooled=pooled)


def test_aggregate_examples():
    s = ev.aggregate_seeds([_report(0), _report(1)])
    assert s.std["f1"] == 0 and s.ci95["f1"] == (0.5, 0.5)
    s = ev.aggregate_seeds([_report(0, f1=0.6), _report(1, f1=0.8)])
    assert abs(s.mean["f1"] - 0.7) < 1e-15 and abs(s.std["f1"] - 0.1) < 1e-15
    with pytest.raises(TooFewReports):
        ev.aggregate_seeds([_report(0)])


def test_aggregate_five_reports():
    vals = [Fraction(v, 100) for v in (61, 72, 55, 80, 67)]
    s = ev.aggregate_seeds([_report(i, f1=float(v)) for i, v in enumerate(vals)])
    mean = sum(vals) / 5
    var = sum((v - mean) ** 2 for v in vals) / 5
    assert abs(s.mean["f1"] - float(mean)) < 1e-15
    assert abs(s.std["f1"] - float(var) ** 0.5) < 1e-15
    half = 1.96 * float(var) ** 0.5 / 5 ** 0.5
    assert abs(s.ci95["f1"][1] - (float(mean) + half)) < 1e-15
