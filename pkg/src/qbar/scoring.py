"""Anomaly scores: quantum deviation, directional drift, fusion and calibration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ClassTooSmall,
    DegenerateAxis,
    DimensionMismatch,
    GammaOutOfRange,
    OneClassValidation,
    SingularCovariance,
    TooFewScores,
)

GAMMA_GRID = tuple(i / 10 for i in range(11))
DEFAULT_SHRINKAGE = 1.0


@dataclass(frozen=True)
class MutationAxis:
    w_mut: np.ndarray
    mean_normal: np.ndarray
    mean_sensational: np.ndarray
    shrinkage: float = DEFAULT_SHRINKAGE

    @property
    def dim(self) -> int:
        return int(self.w_mut.size)


@dataclass(frozen=True)
class ScoreNormalizer:
    mean: float
    std: float

    def normalize(self, score: float) -> float:
        return (score - self.mean) / self.std


@dataclass(frozen=True)
class DecisionConfig:
    gamma: float
    tau: float
    validation_f1: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise GammaOutOfRange(f"gamma {self.gamma} not in [0, 1]")


def _as_matrix(corpus) -> np.ndarray:
    rows = [np.asarray(getattr(x, "values", x), dtype=np.float64).reshape(-1) for x in corpus]
    return np.stack(rows) if rows else np.empty((0, 0))


def fit_mutation_axis(normal_corpus, sensational_corpus,
                      shrinkage: float = DEFAULT_SHRINKAGE) -> MutationAxis:
    """Two-class Fisher discriminant with trace-scaled ridge shrinkage.

    ``w = (S + a I)^-1 (mu_sens - mu_normal)`` where ``S`` is the pooled
    within-class covariance and ``a = shrinkage * trace(S) / D``.
    """
    xn, xs = _as_matrix(normal_corpus), _as_matrix(sensational_corpus)
    if xn.shape[0] < 2 or xs.shape[0] < 2:
        raise ClassTooSmall(f"need >= 2 samples per class, got {xn.shape[0]} and {xs.shape[0]}")
    if xn.shape[1] != xs.shape[1]:
        raise DimensionMismatch(f"class dimensions differ: {xn.shape[1]} vs {xs.shape[1]}")
    mu_n, mu_s = xn.mean(axis=0), xs.mean(axis=0)
    cn, cs = xn - mu_n, xs - mu_s
    pooled = (cn.T @ cn + cs.T @ cs) / (xn.shape[0] + xs.shape[0] - 2)
    d = pooled.shape[0]
    alpha = shrinkage * np.trace(pooled) / d
    reg = pooled + alpha * np.eye(d)
    diff = mu_s - mu_n
    if not np.any(diff):
        raise DegenerateAxis("class means are identical")
    try:
        w = np.linalg.solve(reg, diff)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from None
    if not np.all(np.isfinite(w)) or np.linalg.cond(reg) > 1e15:
        raise SingularCovariance("regularized covariance is numerically singular")
    if np.linalg.norm(w) <= 1e-12:
        raise DegenerateAxis("discriminant direction vanished")
    return MutationAxis(w, mu_n, mu_s, shrinkage)


def s_dir(x, axis: MutationAxis, *, return_flag: bool = False):
    """Cosine similarity of ``x`` with the mutation axis; 0 for a zero vector."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64).reshape(-1)
    if x.size != axis.dim:
        raise DimensionMismatch(f"vector dim {x.size} != axis dim {axis.dim}")
    nx = np.linalg.norm(x)
    if nx <= 1e-12:
        return (0.0, True) if return_flag else 0.0
    c = float(x @ axis.w_mut / (nx * np.linalg.norm(axis.w_mut)))
    c = min(max(c, -1.0), 1.0)
    return (c, False) if return_flag else c


def fit_normalizer(scores) -> ScoreNormalizer:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size < 2:
        raise TooFewScores(f"need >= 2 scores, got {scores.size}")
    mean = float(scores.mean())
    std = float(np.sqrt(np.mean((scores - mean) ** 2)))
    return ScoreNormalizer(mean, max(std, 1e-12))


def s_final(s_quant: float, s_dir_value: float, normalizers, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise GammaOutOfRange(f"gamma {gamma} not in [0, 1]")
    nq, nd = normalizers
    return gamma * nq.normalize(s_quant) + (1.0 - gamma) * nd.normalize(s_dir_value)


def classify(score: float, config: DecisionConfig) -> str:
    return "anomaly" if score > config.tau else "normal"


def _best_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Best ``(f1, tau)`` over -inf, midpoints of distinct sorted scores, +inf.

    Ties go to the smaller threshold.
    """
    distinct = np.unique(scores)
    taus = np.concatenate(([-np.inf], (distinct[:-1] + distinct[1:]) / 2, [np.inf]))
    pos = labels.sum()
    best_f1, best_tau = -1.0, np.inf
    for tau in taus:
        pred = scores > tau
        tp = int(np.sum(pred & labels))
        denom = pred.sum() + pos
        f1 = 2.0 * tp / denom if denom else 0.0
        if f1 > best_f1:
            best_f1, best_tau = f1, float(tau)
    return best_f1, best_tau


def calibrate(validation_scores, normalizers, gamma_grid=GAMMA_GRID) -> DecisionConfig:
    """Pick (gamma, tau) maximizing validation F1.

    ``validation_scores`` holds ``(s_quant, s_dir, label)`` triples where a
    truthy label marks an anomaly. Ties: smaller gamma, then smaller tau.
    """
    rows = list(validation_scores)
    labels = np.array([bool(r[2]) for r in rows])
    if labels.all() or not labels.any():
        raise OneClassValidation("validation needs both normal and anomalous samples")
    nq, nd = normalizers
    zq = np.array([nq.normalize(r[0]) for r in rows])
    zd = np.array([nd.normalize(r[1]) for r in rows])
    best = None
    for gamma in gamma_grid:
        f1, tau = _best_threshold(gamma * zq + (1.0 - gamma) * zd, labels)
        if best is None or f1 > best[0]:
            best = (f1, gamma, tau)
    f1, gamma, tau = best
    return DecisionConfig(gamma=gamma, tau=tau, validation_f1=f1)
