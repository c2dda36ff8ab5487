"""Numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same in-place contract and parameter layout; used when the extension is not
built or when ``QBAR_BACKEND=python`` is set.
"""
import numpy as np

BACKEND = "python"


def _pairs(psi, n, q):
    # (high bits, target bit, low bits) view
    return psi.reshape(1 << q, 2, 1 << (n - 1 - q))


def ry(psi, n, q, angle):
    v = _pairs(psi, n, q)
    c, s = np.cos(0.5 * angle), np.sin(0.5 * angle)
    a = v[:, 0, :].copy()
    b = v[:, 1, :]
    v[:, 0, :] = c * a - s * b
    v[:, 1, :] = s * a + c * b


def rz(psi, n, q, angle):
    v = _pairs(psi, n, q)
    h = 0.5 * angle
    v[:, 0, :] *= complex(np.cos(h), -np.sin(h))
    v[:, 1, :] *= complex(np.cos(h), np.sin(h))


def cnot(psi, n, control, target):
    t = psi.reshape((2,) * n)
    index = [slice(None)] * n
    index[control] = 1
    sub = t[tuple(index)]
    axis = target if target < control else target - 1
    sub[...] = np.flip(sub, axis=axis).copy()


def ansatz_forward(psi, n, n_layers, theta):
    for layer in range(n_layers):
        base = layer * 2 * n
        for q in range(n):
            ry(psi, n, q, theta[base + 2 * q])
        for q in range(n):
            rz(psi, n, q, theta[base + 2 * q + 1])
        for q in range(n - 1):
            cnot(psi, n, q, q + 1)


def ansatz_inverse(psi, n, n_layers, theta):
    for layer in range(n_layers - 1, -1, -1):
        base = layer * 2 * n
        for q in range(n - 2, -1, -1):
            cnot(psi, n, q, q + 1)
        for q in range(n - 1, -1, -1):
            rz(psi, n, q, -theta[base + 2 * q + 1])
        for q in range(n - 1, -1, -1):
            ry(psi, n, q, -theta[base + 2 * q])


def overlap_grad(center, psi_in, n, n_layers, theta):
    phi = np.array(psi_in, dtype=np.complex128, copy=True)
    lam = np.array(center, dtype=np.complex128, copy=True)
    grad = np.zeros(2 * n * n_layers)
    ansatz_forward(phi, n, n_layers, theta)
    ov = complex(np.vdot(lam, phi))
    for layer in range(n_layers - 1, -1, -1):
        base = layer * 2 * n
        for q in range(n - 2, -1, -1):
            cnot(phi, n, q, q + 1)
            cnot(lam, n, q, q + 1)
        for q in range(n - 1, -1, -1):
            p, l = _pairs(phi, n, q), _pairs(lam, n, q)
            grad[base + 2 * q + 1] = 0.5 * (
                np.sum((np.conj(l[:, 0, :]) * p[:, 0, :]).imag)
                - np.sum((np.conj(l[:, 1, :]) * p[:, 1, :]).imag))
            rz(phi, n, q, -theta[base + 2 * q + 1])
            rz(lam, n, q, -theta[base + 2 * q + 1])
        for q in range(n - 1, -1, -1):
            p, l = _pairs(phi, n, q), _pairs(lam, n, q)
            grad[base + 2 * q] = 0.5 * (
                np.sum((np.conj(l[:, 1, :]) * p[:, 0, :]).real)
                - np.sum((np.conj(l[:, 0, :]) * p[:, 1, :]).real))
            ry(phi, n, q, -theta[base + 2 * q])
            ry(lam, n, q, -theta[base + 2 * q])
    return grad, ov
