"""Detection metrics, per-creator false positive rates and seed aggregation.

Average precision is the step-function integral of the PR curve: scores are
ranked in descending order and tied scores form a single threshold, so the
value does not depend on the input order of tied items (constant scores give
exactly the positive prevalence). Metric ratios with a zero denominator are
defined as 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, NoPositives, TooFewReports, UnknownCreator

METRICS = ("precision", "recall", "f1", "aupr", "fpr")


def as_positive(value) -> bool:
    """Anomaly is the positive class; accepts bools, 0/1 and label strings."""
    if isinstance(value, str):
        if value in ("anomaly", "splice", "inject"):
            return True
        if value == "normal":
            return False
        raise ValueError(f"unknown label {value!r}")
    return bool(value)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels, predictions) -> ConfusionCounts:
    labels, predictions = list(labels), list(predictions)
    if len(labels) != len(predictions):
        raise LengthMismatch(f"{len(labels)} labels vs {len(predictions)} predictions")
    tp = fp = tn = fn = 0
    for y, p in zip(labels, predictions):
        y, p = as_positive(y), as_positive(p)
        if p:
            tp, fp = (tp + 1, fp) if y else (tp, fp + 1)
        else:
            fn, tn = (fn + 1, tn) if y else (fn, tn + 1)
    return ConfusionCounts(tp, fp, tn, fn)


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def prf1(counts: ConfusionCounts) -> tuple[float, float, float]:
    p = _ratio(counts.tp, counts.tp + counts.fp)
    r = _ratio(counts.tp, counts.tp + counts.fn)
    # 2PR/(P+R) written over integer counts
    f1 = _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn)
    return p, r, f1


def fpr(counts: ConfusionCounts) -> float:
    return _ratio(counts.fp, counts.fp + counts.tn)


def pr_curve(labels, scores) -> list[tuple[float, float, float]]:
    """``(threshold, precision, recall)`` per distinct score, highest first.

    Each point predicts ``score >= threshold`` as anomalous.
    """
    y = np.array([as_positive(v) for v in labels], dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    if y.size != s.size:
        raise LengthMismatch(f"{y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive label")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    return [(float(s[i]), float(tp[i] / (i + 1)), float(tp[i] / n_pos)) for i in last]


def aupr(labels, scores) -> float:
    """Average precision: sum over thresholds of (recall step) x precision."""
    ap, prev_recall = 0.0, 0.0
    for _, precision, recall in pr_curve(labels, scores):
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def per_creator_fpr(manifest, predictions, creators=None) -> dict:
    """False positive rate per creator over its test split.

    ``predictions`` maps video id to a prediction; every test video of the
    requested creators must be covered.
    """
    known = manifest.creator_ids
    creators = known if creators is None else list(creators)
    out = {}
    for cid in creators:
        if cid not in known:
            raise UnknownCreator(f"creator {cid!r} not in manifest")
        entries = manifest.videos_for(cid, "test")
        missing = [e["id"] for e in entries if e["id"] not in predictions]
        if missing:
            raise LengthMismatch(f"no prediction for {missing[:3]}")
        counts = confusion([e["label"] for e in entries], [predictions[e["id"]] for e in entries])
        out[cid] = fpr(counts)
    return out


@dataclass
class EvalReport:
    """Metrics of one seed: per-creator rows, pooled metrics and the pooled PR curve."""

    seed: int
    per_creator: dict = field(default_factory=dict)
    pooled: dict = field(default_factory=dict)
    pr_points: list = field(default_factory=list)
    variant: str = "calibrated"


def creator_metrics(labels, predictions, scores) -> dict:
    counts = confusion(labels, predictions)
    p, r, f1 = prf1(counts)
    has_pos = any(as_positive(v) for v in labels)
    return {"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn,
            "precision": p, "recall": r, "f1": f1,
            "aupr": aupr(labels, scores) if has_pos else 0.0, "fpr": fpr(counts)}


def build_report(seed: int, per_creator_rows: dict, variant: str = "calibrated") -> EvalReport:
    """``per_creator_rows`` maps creator id to ``(labels, predictions, scores)``."""
    per_creator, all_y, all_p, all_s = {}, [], [], []
    for cid in sorted(per_creator_rows):
        y, p, s = per_creator_rows[cid]
        per_creator[cid] = creator_metrics(y, p, s)
        all_y += list(y)
        all_p += list(p)
        all_s += list(s)
    pooled = creator_metrics(all_y, all_p, all_s)
    return EvalReport(seed, per_creator, pooled, pr_curve(all_y, all_s), variant)


@dataclass
class SeedSummary:
    n: int
    mean: dict
    std: dict
    ci95: dict  # metric -> (low, high)


def aggregate_seeds(reports) -> SeedSummary:
    """Mean, population std and normal-approximation 95% CI of pooled metrics."""
    reports = list(reports)
    if len(reports) < 2:
        raise TooFewReports(f"need >= 2 reports, got {len(reports)}")
    n = len(reports)
    mean, std, ci = {}, {}, {}
    for name in METRICS:
        values = np.array([r.pooled[name] for r in reports], dtype=np.float64)
        mu = float(values.mean())
        sd = float(np.sqrt(np.mean((values - mu) ** 2)))
        half = 1.96 * sd / math.sqrt(n)
        mean[name], std[name], ci[name] = mu, sd, (mu - half, mu + half)
    return SeedSummary(n, mean, std, ci)


def robustness_sweep(detectors, manifest, sigmas=(0.0, 0.05, 0.1, 0.2), seed: int = 0) -> list:
    """Pooled test F1 per noise level, with noise added to fused vectors.

    ``detectors`` maps creator id to a calibrated detector. Returns
    ``[(sigma, f1), ...]`` in the order given; no monotonicity is implied.
    """
    from .pipeline import final_scores, split_scores

    table = []
    for sigma in sigmas:
        total = ConfusionCounts()
        for cid in sorted(detectors):
            det = detectors[cid]
            _, labels, raw = split_scores(det, manifest, "test", sigma, seed)
            preds = [s > det.decision.tau for s in final_scores(det, raw)]
            total = total + confusion(labels, preds)
        table.append((float(sigma), prf1(total)[2]))
    return table
