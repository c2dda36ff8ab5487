# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled state-vector kernels.

All routines act in place on contiguous complex128 buffers of length 2**n.
Qubit ``q`` addresses bit ``n - 1 - q`` of the basis index (qubit 0 is the
most significant bit). Parameter layout for the ansatz is
``layer * 2n + 2q + {0: Ry, 1: Rz}``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

BACKEND = "cython"


cdef inline void _ry(double complex[::1] psi, Py_ssize_t dim, Py_ssize_t stride,
                     double c, double s) noexcept nogil:
    cdef Py_ssize_t hi, blk, j
    cdef double complex a, b
    for hi in range(dim // (2 * stride)):
        blk = hi * 2 * stride
        for j in range(blk, blk + stride):
            a = psi[j]
            b = psi[j + stride]
            psi[j] = c * a - s * b
            psi[j + stride] = s * a + c * b


cdef inline void _rz(double complex[::1] psi, Py_ssize_t dim, Py_ssize_t stride,
                     double complex e0, double complex e1) noexcept nogil:
    cdef Py_ssize_t hi, blk, j
    for hi in range(dim // (2 * stride)):
        blk = hi * 2 * stride
        for j in range(blk, blk + stride):
            psi[j] = e0 * psi[j]
            psi[j + stride] = e1 * psi[j + stride]


cdef inline void _cnot(double complex[::1] psi, Py_ssize_t dim,
                       Py_ssize_t cmask, Py_ssize_t tmask) noexcept nogil:
    # visit each index with the control bit set and the target bit clear
    cdef Py_ssize_t hi_mask = cmask if cmask > tmask else tmask
    cdef Py_ssize_t lo_mask = tmask if cmask > tmask else cmask
    cdef Py_ssize_t set_hi = cmask if cmask > tmask else 0
    cdef Py_ssize_t set_lo = 0 if cmask > tmask else cmask
    cdef Py_ssize_t a, b, j, i
    cdef double complex tmp
    for a in range(dim // (2 * hi_mask)):
        for b in range(hi_mask // (2 * lo_mask)):
            i = a * 2 * hi_mask + set_hi + b * 2 * lo_mask + set_lo
            for j in range(i, i + lo_mask):
                tmp = psi[j]
                psi[j] = psi[j + tmask]
                psi[j + tmask] = tmp


cdef inline void _rz_angle(double complex[::1] psi, Py_ssize_t dim, Py_ssize_t stride,
                           double angle) noexcept nogil:
    cdef double h = 0.5 * angle
    _rz(psi, dim, stride, cos(h) - 1j * sin(h), cos(h) + 1j * sin(h))


cdef inline void _ry_angle(double complex[::1] psi, Py_ssize_t dim, Py_ssize_t stride,
                           double angle) noexcept nogil:
    _ry(psi, dim, stride, cos(0.5 * angle), sin(0.5 * angle))


def ry(double complex[::1] psi, int n, int q, double angle):
    _ry_angle(psi, psi.shape[0], 1 << (n - 1 - q), angle)


def rz(double complex[::1] psi, int n, int q, double angle):
    _rz_angle(psi, psi.shape[0], 1 << (n - 1 - q), angle)


def cnot(double complex[::1] psi, int n, int control, int target):
    _cnot(psi, psi.shape[0], 1 << (n - 1 - control), 1 << (n - 1 - target))


cdef void _forward(double complex[::1] psi, int n, int n_layers,
                   const double[::1] theta) noexcept nogil:
    cdef Py_ssize_t dim = psi.shape[0]
    cdef int layer, q
    cdef Py_ssize_t base
    for layer in range(n_layers):
        base = layer * 2 * n
        for q in range(n):
            _ry_angle(psi, dim, 1 << (n - 1 - q), theta[base + 2 * q])
        for q in range(n):
            _rz_angle(psi, dim, 1 << (n - 1 - q), theta[base + 2 * q + 1])
        for q in range(n - 1):
            _cnot(psi, dim, 1 << (n - 1 - q), 1 << (n - 2 - q))


cdef void _inverse(double complex[::1] psi, int n, int n_layers,
                   const double[::1] theta) noexcept nogil:
    cdef Py_ssize_t dim = psi.shape[0]
    cdef int layer, q
    cdef Py_ssize_t base
    for layer in range(n_layers - 1, -1, -1):
        base = layer * 2 * n
        for q in range(n - 2, -1, -1):
            _cnot(psi, dim, 1 << (n - 1 - q), 1 << (n - 2 - q))
        for q in range(n - 1, -1, -1):
            _rz_angle(psi, dim, 1 << (n - 1 - q), -theta[base + 2 * q + 1])
        for q in range(n - 1, -1, -1):
            _ry_angle(psi, dim, 1 << (n - 1 - q), -theta[base + 2 * q])


def ansatz_forward(double complex[::1] psi, int n, int n_layers, const double[::1] theta):
    with nogil:
        _forward(psi, n, n_layers, theta)


def ansatz_inverse(double complex[::1] psi, int n, int n_layers, const double[::1] theta):
    with nogil:
        _inverse(psi, n, n_layers, theta)


def overlap_grad(const double complex[::1] center, const double complex[::1] psi_in,
                 int n, int n_layers, const double[::1] theta):
    """Return ``(grad, <center|U|psi_in>)`` with grad_k = d Re<center|U|psi_in> / d theta_k."""
    cdef Py_ssize_t dim = psi_in.shape[0]
    cdef double complex[::1] phi = np.array(psi_in, dtype=np.complex128, copy=True)
    cdef double complex[::1] lam = np.array(center, dtype=np.complex128, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad_arr = np.zeros(2 * n * n_layers)
    cdef double[::1] grad = grad_arr
    cdef double complex ov = 0
    cdef int layer, q
    cdef Py_ssize_t base, hi, blk, j, stride, i
    cdef double acc
    cdef double complex l0, l1, p0, p1
    with nogil:
        _forward(phi, n, n_layers, theta)
        for i in range(dim):
            ov = ov + lam[i].conjugate() * phi[i]
        for layer in range(n_layers - 1, -1, -1):
            base = layer * 2 * n
            for q in range(n - 2, -1, -1):
                _cnot(phi, dim, 1 << (n - 1 - q), 1 << (n - 2 - q))
                _cnot(lam, dim, 1 << (n - 1 - q), 1 << (n - 2 - q))
            for q in range(n - 1, -1, -1):
                stride = 1 << (n - 1 - q)
                acc = 0.0
                for hi in range(dim // (2 * stride)):
                    blk = hi * 2 * stride
                    for j in range(blk, blk + stride):
                        acc = acc + (lam[j].conjugate() * phi[j]).imag
                        acc = acc - (lam[j + stride].conjugate() * phi[j + stride]).imag
                grad[base + 2 * q + 1] = 0.5 * acc
                _rz_angle(phi, dim, stride, -theta[base + 2 * q + 1])
                _rz_angle(lam, dim, stride, -theta[base + 2 * q + 1])
            for q in range(n - 1, -1, -1):
                stride = 1 << (n - 1 - q)
                acc = 0.0
                for hi in range(dim // (2 * stride)):
                    blk = hi * 2 * stride
                    for j in range(blk, blk + stride):
                        l0 = lam[j]
                        l1 = lam[j + stride]
                        p0 = phi[j]
                        p1 = phi[j + stride]
                        acc = acc + (l1.conjugate() * p0).real - (l0.conjugate() * p1).real
                grad[base + 2 * q] = 0.5 * acc
                _ry_angle(phi, dim, stride, -theta[base + 2 * q])
                _ry_angle(lam, dim, stride, -theta[base + 2 * q])
    return grad_arr, complex(ov)
