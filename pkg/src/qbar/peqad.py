"""Hypersphere training of the variational circuit around a fixed center state.

Loss per batch of mapped states::

    L(theta) = mean_i ||U(theta)|psi_i> - |c>||^2 + lam/2 * ||theta||^2

with the squared distance evaluated as ``2 - 2 Re<c|psi>`` (both unit norm).
Because ``U`` is linear, the data term and its gradient only depend on the
mean input state, so one adjoint sweep per step serves the whole batch.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCenter, DimensionMismatch
from .features import ProjectionSpec
from .statevector import (
    AnsatzConfig,
    StateVector,
    as_params,
    forward_raw,
    overlap_grad_raw,
    run_ansatz,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1e-4
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int | None = None  # None means full batch
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainReport:
    loss_per_epoch: np.ndarray
    initial_loss: float
    final_loss: float
    wall_time: float

    @property
    def ratio(self) -> float:
        return self.final_loss / self.initial_loss if self.initial_loss else float("nan")


@dataclass
class PeqadModel:
    ansatz: AnsatzConfig
    theta: np.ndarray
    center: StateVector
    projection: ProjectionSpec | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.theta = as_params(self.theta, self.ansatz)
        if self.center.n_qubits != self.ansatz.n_qubits:
            raise DimensionMismatch("center does not match the ansatz width")

    @property
    def parameter_count(self) -> int:
        return self.ansatz.parameter_count

    def map(self, psi_in: StateVector) -> StateVector:
        return run_ansatz(psi_in, self.ansatz, self.theta)

    def distance(self, psi_in: StateVector) -> float:
        return distance(self, psi_in)


class Adam:
    def __init__(self, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, lr=0.01):
        self.lr = lr

    def step(self, params, grad):
        return params - self.lr * grad


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    return SGD(config.learning_rate)


def init_theta(config: AnsatzConfig, seed: int) -> np.ndarray:
    """Angles i.i.d. uniform on [-pi, pi) from a PCG64 stream."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(-np.pi, np.pi, size=config.parameter_count)


def pairwise_sum(rows: np.ndarray) -> np.ndarray:
    """Sum along axis 0 by recursive halving (fixed tree for a given count)."""
    n = rows.shape[0]
    if n == 1:
        return rows[0].copy()
    half = n // 2
    return pairwise_sum(rows[:half]) + pairwise_sum(rows[half:])


def canonical_stack(states) -> np.ndarray:
    """Stack amplitudes sorted by their byte image so sums ignore input order."""
    arrays = [s.amplitudes for s in states]
    arrays.sort(key=lambda a: a.tobytes())
    return np.stack(arrays)


def mean_state(states) -> np.ndarray:
    if not states:
        raise ValueError("need at least one state")
    return pairwise_sum(canonical_stack(states)) / len(states)


def init_center(encoded_train, config: AnsatzConfig, theta_0) -> StateVector:
    """Normalized mean of the mapped training states at ``theta_0``."""
    if len(encoded_train) < 1:
        raise DegenerateCenter("no training states")
    mapped = [run_ansatz(s, config, theta_0) for s in encoded_train]
    mean = mean_state(mapped)
    norm = np.linalg.norm(mean)
    if norm < 1e-6:
        raise DegenerateCenter(f"mean mapped state has norm {norm:.3e}")
    return StateVector(mean / norm, check=False)


def hypersphere_loss(batch, center: StateVector, theta, lam: float) -> float:
    """Mean squared distance of mapped states from ``center`` plus ridge term."""
    theta = np.asarray(theta, dtype=np.float64)
    if not batch:
        raise ValueError("empty batch")
    total = 0.0
    for psi in batch:
        if psi.dim != center.dim:
            raise DimensionMismatch(f"state dim {psi.dim} != center dim {center.dim}")
        total += 2.0 - 2.0 * np.vdot(center.amplitudes, psi.amplitudes).real
    return total / len(batch) + 0.5 * lam * float(theta @ theta)


def loss_and_grad(mean_in: np.ndarray, center: StateVector, ansatz: AnsatzConfig,
                  theta: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    """Loss and gradient given the (unnormalized) mean input state."""
    grad_ov, ov = overlap_grad_raw(center.amplitudes, mean_in, ansatz, theta)
    loss = 2.0 - 2.0 * ov.real + 0.5 * lam * float(theta @ theta)
    return loss, -2.0 * grad_ov + lam * theta


def _batches(states, batch_size):
    if batch_size is None or batch_size >= len(states):
        return [states]
    return [states[i:i + batch_size] for i in range(0, len(states), batch_size)]


def train(train_states_in, config: TrainConfig, ansatz: AnsatzConfig,
          projection: ProjectionSpec | None = None) -> tuple[PeqadModel, TrainReport]:
    if not train_states_in:
        raise ValueError("need at least one training state")
    for s in train_states_in:
        if s.n_qubits != ansatz.n_qubits:
            raise DimensionMismatch("training state width does not match the ansatz")
    start = time.perf_counter()
    theta = init_theta(ansatz, config.seed)
    center = init_center(train_states_in, ansatz, theta)
    full_mean = mean_state(train_states_in)
    batch_means = [mean_state(b) for b in _batches(list(train_states_in), config.batch_size)]
    opt = make_optimizer(config)

    losses = np.empty(config.epochs)
    if len(batch_means) == 1:
        # the sweep at theta_{e+1} also yields the loss recorded for epoch e
        initial_loss, grad = loss_and_grad(full_mean, center, ansatz, theta, config.lam)
        for epoch in range(config.epochs):
            theta = opt.step(theta, grad)
            losses[epoch], grad = loss_and_grad(full_mean, center, ansatz, theta, config.lam)
            _log_epoch(epoch, config.epochs, losses[epoch])
    else:
        initial_loss = _full_loss(full_mean, center, ansatz, theta, config.lam)
        for epoch in range(config.epochs):
            for mean_in in batch_means:
                _, grad = loss_and_grad(mean_in, center, ansatz, theta, config.lam)
                theta = opt.step(theta, grad)
            losses[epoch] = _full_loss(full_mean, center, ansatz, theta, config.lam)
            _log_epoch(epoch, config.epochs, losses[epoch])
    model = PeqadModel(ansatz, theta, center, projection, config)
    report = TrainReport(losses, float(initial_loss), float(losses[-1]),
                         time.perf_counter() - start)
    return model, report


def _log_epoch(epoch, epochs, loss):
    if epoch % 50 == 0 or epoch == epochs - 1:
        log.debug("epoch %d loss %.6g", epoch, loss)


def _full_loss(mean_in, center, ansatz, theta, lam) -> float:
    mapped = forward_raw(mean_in, ansatz, theta)
    return float(2.0 - 2.0 * np.vdot(center.amplitudes, mapped).real
                 + 0.5 * lam * float(theta @ theta))


def distance(model: PeqadModel, psi_in: StateVector) -> float:
    """Squared distance of the mapped input from the center, in [0, 4]."""
    if psi_in.n_qubits != model.ansatz.n_qubits:
        raise DimensionMismatch("input width does not match the model")
    mapped = model.map(psi_in)
    d = 2.0 - 2.0 * np.vdot(model.center.amplitudes, mapped.amplitudes).real
    return float(min(max(d, 0.0), 4.0))
