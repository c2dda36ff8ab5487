"""Dense n-qubit state vectors and the layered Ry/Rz + CNOT-chain ansatz.

Basis index convention: qubit 0 is the most significant bit, so on two
qubits ``|10>`` is index 2.

The gate kernels come from the compiled ``qbar._kernels`` extension when it
is importable, otherwise from the numpy fallback ``qbar._kernels_py``. Set
``QBAR_BACKEND=python`` to force the fallback (``cython`` makes a missing
extension an error).
"""
from __future__ import annotations

import importlib
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadLength,
    ControlEqualsTarget,
    DimensionMismatch,
    QubitOutOfRange,
    ZeroNormInput,
)

NORM_TOL = 1e-10
MAX_QUBITS = 16


def load_backend(name: str):
    """Import a kernel backend by name (``"cython"`` or ``"python"``)."""
    if name == "cython":
        return importlib.import_module("qbar._kernels")
    if name == "python":
        return importlib.import_module("qbar._kernels_py")
    raise ValueError(f"unknown backend {name!r}")


def _select_backend():
    forced = os.environ.get("QBAR_BACKEND", "").strip().lower()
    if forced:
        return load_backend(forced)
    try:
        return load_backend("cython")
    except ImportError:
        return load_backend("python")


_kernels = _select_backend()
BACKEND: str = _kernels.BACKEND


class StateVector:
    """Unit-norm complex amplitude vector over ``2**n_qubits`` basis states.

    The amplitude array is stored read-only; gate functions return new
    instances.
    """

    __slots__ = ("_amps", "_n")

    def __init__(self, amplitudes, *, check: bool = True):
        amps = np.array(amplitudes, dtype=np.complex128, copy=True).reshape(-1)
        n = _log2_exact(amps.size)
        if not 1 <= n <= MAX_QUBITS:
            raise BadLength(f"state length {amps.size} is outside 2**1..2**{MAX_QUBITS}")
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOL}")
        amps.setflags(write=False)
        self._amps = amps
        self._n = n

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return self._amps.size

    def norm(self) -> float:
        return float(np.linalg.norm(self._amps))

    def __len__(self):
        return self._amps.size

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return np.array_equal(self._amps, other._amps)

    def __hash__(self):
        return hash(self._amps.tobytes())

    def __repr__(self):
        return f"StateVector(n_qubits={self._n})"

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps)

    def _buffer(self) -> np.ndarray:
        return np.array(self._amps, copy=True)


@dataclass(frozen=True)
class AnsatzConfig:
    """Circuit topology: per layer Ry on all qubits, Rz on all qubits, then
    CNOT(q, q+1) for q = 0..n-2."""

    n_qubits: int = 12
    n_layers: int = 10
    entanglement: str = "linear-chain"

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        if self.n_layers < 0:
            raise ValueError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.entanglement != "linear-chain":
            raise ValueError(f"unsupported entanglement {self.entanglement!r}")

    @property
    def parameter_count(self) -> int:
        return self.n_qubits * 2 * self.n_layers

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def param_index(self, layer: int, qubit: int, gate: str) -> int:
        """Flat position of an angle; ``gate`` is ``"ry"`` or ``"rz"``."""
        return layer * 2 * self.n_qubits + 2 * qubit + (0 if gate == "ry" else 1)


def _log2_exact(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise BadLength(f"length {length} is not a power of two")
    return length.bit_length() - 1


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise QubitOutOfRange(f"qubit {qubit} not in 0..{state.n_qubits - 1}")


def _checked(buf: np.ndarray) -> StateVector:
    out = StateVector(buf, check=False)
    norm = out.norm()
    if abs(norm - 1.0) > NORM_TOL:
        raise ArithmeticError(f"norm drifted to {norm!r}")
    return out


def amplitude_encode(x) -> StateVector:
    """Load a real vector of length ``2**n`` into amplitudes ``x / ||x||``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _log2_exact(x.size)
    norm = np.linalg.norm(x)
    if not norm > 1e-12:
        raise ZeroNormInput(f"input norm {norm!r} <= 1e-12")
    return StateVector(x / norm, check=False)


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    _check_qubit(state, qubit)
    buf = state._buffer()
    _kernels.ry(buf, state.n_qubits, qubit, float(angle))
    return _checked(buf)


def apply_rz(state: StateVector, qubit: int, angle: float) -> StateVector:
    _check_qubit(state, qubit)
    buf = state._buffer()
    _kernels.rz(buf, state.n_qubits, qubit, float(angle))
    return _checked(buf)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ControlEqualsTarget(f"control and target are both {control}")
    buf = state._buffer()
    _kernels.cnot(buf, state.n_qubits, control, target)
    return _checked(buf)


def as_params(theta, config: AnsatzConfig) -> np.ndarray:
    theta = np.ascontiguousarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != config.parameter_count:
        raise DimensionMismatch(
            f"expected {config.parameter_count} angles, got {theta.size}")
    return theta


def _check_dims(state: StateVector, config: AnsatzConfig) -> None:
    if state.n_qubits != config.n_qubits:
        raise DimensionMismatch(
            f"state has {state.n_qubits} qubits, ansatz expects {config.n_qubits}")


def run_ansatz(state_in: StateVector, config: AnsatzConfig, theta) -> StateVector:
    """Return ``U(theta)|state_in>``."""
    _check_dims(state_in, config)
    theta = as_params(theta, config)
    buf = state_in._buffer()
    _kernels.ansatz_forward(buf, config.n_qubits, config.n_layers, theta)
    return _checked(buf)


def run_ansatz_inverse(state: StateVector, config: AnsatzConfig, theta) -> StateVector:
    """Return ``U(theta)^dagger |state>``."""
    _check_dims(state, config)
    theta = as_params(theta, config)
    buf = state._buffer()
    _kernels.ansatz_inverse(buf, config.n_qubits, config.n_layers, theta)
    return _checked(buf)


def overlap(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``, conjugating the first argument."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def grad_overlap_real(center: StateVector, state_in: StateVector,
                      config: AnsatzConfig, theta) -> np.ndarray:
    """Gradient of ``Re<center|U(theta)|state_in>`` with respect to theta.

    One forward pass, then a single backward sweep that un-applies each gate
    to both the evolved state and the back-propagated center, reading off
    ``0.5 * Im<lam|P|phi>`` for the generator ``P`` of every rotation.
    """
    _check_dims(state_in, config)
    if center.dim != state_in.dim:
        raise DimensionMismatch(f"dimensions differ: {center.dim} vs {state_in.dim}")
    grad, _ = overlap_grad_raw(center.amplitudes, state_in.amplitudes, config, theta)
    return grad


def overlap_grad_raw(center: np.ndarray, psi_in: np.ndarray, config: AnsatzConfig,
                     theta) -> tuple[np.ndarray, complex]:
    """Unchecked variant on raw arrays; ``psi_in`` need not be normalized.

    Returns ``(grad, <center|U|psi_in>)``.
    """
    theta = as_params(theta, config)
    center = np.ascontiguousarray(center, dtype=np.complex128)
    psi_in = np.ascontiguousarray(psi_in, dtype=np.complex128)
    if center.size != config.dim or psi_in.size != config.dim:
        raise DimensionMismatch(f"arrays must have length {config.dim}")
    return _kernels.overlap_grad(center, psi_in, config.n_qubits, config.n_layers, theta)


def forward_raw(psi: np.ndarray, config: AnsatzConfig, theta) -> np.ndarray:
    """``U(theta) psi`` on a raw array (no normalization requirement)."""
    theta = as_params(theta, config)
    buf = np.array(psi, dtype=np.complex128, copy=True)
    if buf.size != config.dim:
        raise DimensionMismatch(f"array must have length {config.dim}")
    _kernels.ansatz_forward(buf, config.n_qubits, config.n_layers, theta)
    return buf
