import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbar import statevector as sv
from qbar.errors import (
    BadLength,
    ControlEqualsTarget,
    DimensionMismatch,
    QubitOutOfRange,
    ZeroNormInput,
)
from qbar.statevector import (
    AnsatzConfig,
    StateVector,
    amplitude_encode,
    apply_cnot,
    apply_ry,
    apply_rz,
    grad_overlap_real,
    overlap,
    run_ansatz,
)

from .conftest import random_state
from .oracles import dense_ansatz

BACKENDS = ["python", "cython"]
S2 = np.sqrt(2) / 2


def test_amplitude_encode_basis():
    x = np.zeros(4096)
    x[0] = 1
    s = amplitude_encode(x)
    assert s.n_qubits == 12
    assert s.amplitudes[0] == 1 and not s.amplitudes[1:].any()


def test_amplitude_encode_normalizes():
    np.testing.assert_allclose(amplitude_encode([3, 4]).amplitudes, [0.6, 0.8])
    assert not amplitude_encode([3, 4]).amplitudes.imag.any()


def test_amplitude_encode_errors():
    with pytest.raises(ZeroNormInput):
        amplitude_encode(np.zeros(8))
    with pytest.raises(BadLength):
        amplitude_encode(np.ones(6))


def test_bit_order_qubit0_is_msb():
    # |10> on two qubits is index 2
    s = apply_ry(StateVector.basis(2, 0), 0, np.pi)
    np.testing.assert_allclose(np.abs(s.amplitudes), [0, 0, 1, 0], atol=1e-15)


def test_ry_examples():
    zero = StateVector.basis(1)
    np.testing.assert_allclose(apply_ry(zero, 0, np.pi).amplitudes, [0, 1], atol=1e-15)
    np.testing.assert_allclose(apply_ry(zero, 0, np.pi / 2).amplitudes, [S2, S2])
    psi = StateVector(random_state(np.random.default_rng(1), 3))
    assert apply_ry(psi, 1, 0.0) == psi


def test_rz_examples():
    plus = StateVector([S2, S2])
    np.testing.assert_allclose(apply_rz(plus, 0, np.pi).amplitudes, [-1j * S2, 1j * S2],
                               atol=1e-15)
    psi = StateVector(random_state(np.random.default_rng(2), 3))
    assert apply_rz(psi, 2, 0.0) == psi
    out = apply_rz(StateVector.basis(1), 0, 0.7)
    np.testing.assert_allclose(np.abs(out.amplitudes), [1, 0])


def test_cnot_truth_table():
    assert apply_cnot(StateVector.basis(2, 2), 0, 1) == StateVector.basis(2, 3)
    assert apply_cnot(StateVector.basis(2, 0), 0, 1) == StateVector.basis(2, 0)
    assert apply_cnot(StateVector.basis(2, 1), 1, 0) == StateVector.basis(2, 3)
    psi = StateVector(random_state(np.random.default_rng(3), 4))
    assert apply_cnot(apply_cnot(psi, 3, 1), 3, 1) == psi


def test_gate_errors():
    psi = StateVector.basis(2)
    with pytest.raises(QubitOutOfRange):
        apply_ry(psi, 2, 0.1)
    with pytest.raises(QubitOutOfRange):
        apply_rz(psi, -1, 0.1)
    with pytest.raises(QubitOutOfRange):
        apply_cnot(psi, 0, 5)
    with pytest.raises(ControlEqualsTarget):
        apply_cnot(psi, 1, 1)


def test_parameter_count():
    assert AnsatzConfig().parameter_count == 240
    assert AnsatzConfig(4, 3).parameter_count == 24
    assert AnsatzConfig().param_index(1, 2, "rz") == 24 + 5


def test_run_ansatz_zero_layers_identity(rng):
    psi = StateVector(random_state(rng, 3))
    assert run_ansatz(psi, AnsatzConfig(3, 0), []) == psi


def test_run_ansatz_zero_angles_is_cnot_chain(rng):
    psi = StateVector(random_state(rng, 2))
    out = run_ansatz(psi, AnsatzConfig(2, 1), np.zeros(4))
    assert out == apply_cnot(psi, 0, 1)


def test_run_ansatz_dimension_mismatch(rng):
    psi = StateVector(random_state(rng, 3))
    with pytest.raises(DimensionMismatch):
        run_ansatz(psi, AnsatzConfig(4, 1), np.zeros(8))
    with pytest.raises(DimensionMismatch):
        run_ansatz(psi, AnsatzConfig(3, 1), np.zeros(5))


@pytest.mark.parametrize("n,layers", [(2, 2), (3, 2), (3, 3)])
def test_run_ansatz_matches_dense(rng, n, layers):
    cfg = AnsatzConfig(n, layers)
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
        psi = random_state(rng, n)
        out = run_ansatz(StateVector(psi), cfg, theta).amplitudes
        assert np.max(np.abs(out - dense_ansatz(n, layers, theta) @ psi)) < 1e-12


def test_overlap(rng):
    psi = StateVector(random_state(rng, 3))
    assert abs(overlap(psi, psi) - 1) < 1e-14
    assert overlap(StateVector.basis(1, 0), StateVector.basis(1, 1)) == 0
    a, b = StateVector(random_state(rng, 4)), StateVector(random_state(rng, 4))
    expected = sum(np.conj(x) * y for x, y in zip(a.amplitudes, b.amplitudes))
    assert abs(overlap(a, b) - expected) < 1e-14
    with pytest.raises(DimensionMismatch):
        overlap(a, StateVector.basis(3))


def _objective(c, psi, cfg, theta):
    return np.vdot(c, sv.forward_raw(psi, cfg, theta)).real


def test_grad_empty_when_no_layers(rng):
    psi = StateVector(random_state(rng, 3))
    assert grad_overlap_real(psi, psi, AnsatzConfig(3, 0), []).size == 0


def test_grad_zero_at_maximum(rng):
    cfg = AnsatzConfig(4, 2)
    theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
    psi = StateVector(random_state(rng, 4))
    center = run_ansatz(psi, cfg, theta)
    assert np.max(np.abs(grad_overlap_real(center, psi, cfg, theta))) < 1e-12


def test_grad_matches_finite_differences(rng):
    cfg = AnsatzConfig(4, 2)
    eps = 1e-5
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
        psi, c = random_state(rng, 4), random_state(rng, 4)
        g = grad_overlap_real(StateVector(c), StateVector(psi), cfg, theta)
        for k in range(cfg.parameter_count):
            e = np.zeros_like(theta)
            e[k] = eps
            fd = (_objective(c, psi, cfg, theta + e) - _objective(c, psi, cfg, theta - e)) / (2 * eps)
            assert abs(g[k] - fd) <= 1e-5 * max(abs(fd), 1e-3)


def test_grad_matches_shift_rule(rng):
    # f is a sinusoid of period 4*pi in each angle, so f' = (f(t+pi) - f(t-pi)) / 4 exactly
    cfg = AnsatzConfig(3, 2)
    theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
    psi, c = random_state(rng, 3), random_state(rng, 3)
    g = grad_overlap_real(StateVector(c), StateVector(psi), cfg, theta)
    for k in range(cfg.parameter_count):
        e = np.zeros_like(theta)
        e[k] = np.pi
        shift = (_objective(c, psi, cfg, theta + e) - _objective(c, psi, cfg, theta - e)) / 4
        assert abs(g[k] - shift) < 1e-12


@pytest.mark.parametrize("name", BACKENDS)
def test_backends_agree(rng, name):
    kern = sv.load_backend(name)
    assert kern.BACKEND == name
    n, layers = 5, 3
    theta = rng.uniform(-np.pi, np.pi, 2 * n * layers)
    psi, c = random_state(rng, n), random_state(rng, n)
    out = psi.copy()
    kern.ansatz_forward(out, n, layers, theta)
    np.testing.assert_allclose(out, dense_ansatz(n, layers, theta) @ psi, atol=1e-12)
    back = out.copy()
    kern.ansatz_inverse(back, n, layers, theta)
    np.testing.assert_allclose(back, psi, atol=1e-12)
    grad, ov = kern.overlap_grad(c, psi, n, layers, theta)
    ref, _ = sv.load_backend("python").overlap_grad(c, psi, n, layers, theta)
    np.testing.assert_allclose(grad, ref, atol=1e-12)
    assert abs(ov - np.vdot(c, out)) < 1e-12


def test_inverse_roundtrip(rng):
    cfg = AnsatzConfig(4, 3)
    theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
    psi = StateVector(random_state(rng, 4))
    back = sv.run_ansatz_inverse(run_ansatz(psi, cfg, theta), cfg, theta)
    np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-13)


def test_determinism(rng):
    cfg = AnsatzConfig(6, 4)
    theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
    psi = StateVector(random_state(rng, 6))
    a = run_ansatz(psi, cfg, theta).amplitudes.tobytes()
    b = run_ansatz(psi, cfg, theta).amplitudes.tobytes()
    assert a == b


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), layers=st.integers(0, 3), seed=st.integers(0, 2 ** 32 - 1))
def test_norm_preserved(n, layers, seed):
    rng = np.random.default_rng(seed)
    cfg = AnsatzConfig(n, layers)
    theta = rng.uniform(-4 * np.pi, 4 * np.pi, cfg.parameter_count)
    out = run_ansatz(StateVector(random_state(rng, n)), cfg, theta)
    assert abs(out.norm() - 1) <= 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_unitarity_small(rng, n):
    cfg = AnsatzConfig(n, 3)
    theta = rng.uniform(-np.pi, np.pi, cfg.parameter_count)
    u = np.column_stack([run_ansatz(StateVector.basis(n, i), cfg, theta).amplitudes
                         for i in range(2 ** n)])
    assert np.max(np.abs(u.conj().T @ u - np.eye(2 ** n))) < 1e-10


def test_statevector_rejects_unnormalized():
    with pytest.raises(ValueError):
        StateVector([1.0, 1.0])


def test_extended_oracle_matches_dense(rng):
    from .oracles import forward_extended

    theta = rng.uniform(-np.pi, np.pi, 24)
    psi = random_state(rng, 4)
    out = forward_extended(psi, 4, 3, theta).astype(complex)
    assert np.max(np.abs(out - dense_ansatz(4, 3, theta) @ psi)) < 1e-13
