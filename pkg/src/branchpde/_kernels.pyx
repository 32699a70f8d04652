# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled 2-D kernels for spectral projection and evaluation.

Column ``c`` of the per-axis basis holds ``k = c - K``: the constant
1/sqrt(2 pi) for k = 0, cos(kx)/sqrt(pi) for k > 0, sin(|k|x)/sqrt(pi) for k < 0.
"""

from libc.math cimport cos, sin, sqrt, M_PI
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint32_t, uint64_t

cdef double INV_SQRT_2PI = 1.0 / sqrt(2.0 * M_PI)
cdef double INV_SQRT_PI = 1.0 / sqrt(M_PI)


cdef inline void _axis_basis(double x, int K, double* phi, double* dphi) noexcept nogil:
    cdef double c1 = cos(x)
    cdef double s1 = sin(x)
    cdef double ck = 1.0, sk = 0.0, tmp
    cdef int k
    phi[K] = INV_SQRT_2PI
    if dphi != NULL:
        dphi[K] = 0.0
    for k in range(1, K + 1):
        tmp = ck * c1 - sk * s1
        sk = sk * c1 + ck * s1
        ck = tmp
        phi[K + k] = ck * INV_SQRT_PI
        phi[K - k] = sk * INV_SQRT_PI
        if dphi != NULL:
            dphi[K + k] = -k * sk * INV_SQRT_PI
            dphi[K - k] = k * ck * INV_SQRT_PI


def project_blocks_2d(const double[:, ::1] pos, int K, Py_ssize_t block,
                      double[:, :, ::1] partials, Py_ssize_t b_start, Py_ssize_t b_end):
    """Fill ``partials[b]`` with sum over block b of outer(phi(x1), phi(x2))."""
    cdef Py_ssize_t n = pos.shape[0]
    cdef int M = 2 * K + 1
    cdef Py_ssize_t b, p, lo, hi
    cdef int i, j
    cdef double a
    cdef double* phi1 = <double*> malloc(M * sizeof(double))
    cdef double* phi2 = <double*> malloc(M * sizeof(double))
    if phi1 == NULL or phi2 == NULL:
        free(phi1)
        free(phi2)
        raise MemoryError()
    with nogil:
        for b in range(b_start, b_end):
            for i in range(M):
                for j in range(M):
                    partials[b, i, j] = 0.0
            lo = b * block
            hi = lo + block
            if hi > n:
                hi = n
            for p in range(lo, hi):
                _axis_basis(pos[p, 0], K, phi1, NULL)
                _axis_basis(pos[p, 1], K, phi2, NULL)
                for i in range(M):
                    a = phi1[i]
                    for j in range(M):
                        partials[b, i, j] += a * phi2[j]
    free(phi1)
    free(phi2)


def evaluate_2d(const double[:, ::1] coeffs, const double[:, ::1] pos,
                double[::1] values, double[:, ::1] grads,
                Py_ssize_t start, Py_ssize_t end, bint with_grad):
    """Series value (and gradient) at ``pos[start:end]``."""
    cdef int M = coeffs.shape[0]
    cdef int K = (M - 1) // 2
    cdef Py_ssize_t p
    cdef int i, j
    cdef double row, drow, v, gx, gy, c
    cdef double* phi1 = <double*> malloc(M * sizeof(double))
    cdef double* phi2 = <double*> malloc(M * sizeof(double))
    cdef double* dphi1 = <double*> malloc(M * sizeof(double))
    cdef double* dphi2 = <double*> malloc(M * sizeof(double))
    if phi1 == NULL or phi2 == NULL or dphi1 == NULL or dphi2 == NULL:
        free(phi1)
        free(phi2)
        free(dphi1)
        free(dphi2)
        raise MemoryError()
    with nogil:
        if with_grad:
            for p in range(start, end):
                _axis_basis(pos[p, 0], K, phi1, dphi1)
                _axis_basis(pos[p, 1], K, phi2, dphi2)
                v = 0.0
                gx = 0.0
                gy = 0.0
                for i in range(M):
                    row = 0.0
                    drow = 0.0
                    for j in range(M):
                        c = coeffs[i, j]
                        row = row + c * phi2[j]
                        drow = drow + c * dphi2[j]
                    v = v + phi1[i] * row
                    gx = gx + dphi1[i] * row
                    gy = gy + phi1[i] * drow
                values[p] = v
                grads[p, 0] = gx
                grads[p, 1] = gy
        else:
            for p in range(start, end):
                _axis_basis(pos[p, 0], K, phi1, NULL)
                _axis_basis(pos[p, 1], K, phi2, NULL)
                v = 0.0
                for i in range(M):
                    row = 0.0
                    for j in range(M):
                        row = row + coeffs[i, j] * phi2[j]
                    v = v + phi1[i] * row
                values[p] = v
    free(phi1)
    free(phi2)
    free(dphi1)
    free(dphi2)


cdef inline double _unit(uint32_t hi, uint32_t lo) noexcept nogil:
    cdef uint64_t bits = ((<uint64_t> hi << 32) | <uint64_t> lo) >> 11
    return (<double> bits + 0.5) * (1.0 / 9007199254740992.0)


def philox_uniform_pair(const uint64_t[::1] ids, uint32_t step, const uint64_t[::1] draws,
                        uint32_t key0, uint32_t key1, double[::1] out1, double[::1] out2):
    """Philox4x32-10 on counters (id_lo, id_hi, step, draw) -> two uniforms per id.

    ``draws`` has length 1 (shared) or len(ids).
    """
    cdef Py_ssize_t n = ids.shape[0]
    cdef Py_ssize_t p
    cdef bint shared = draws.shape[0] == 1
    cdef uint32_t c0, c1, c2, c3, k0, k1, hi0, lo0, hi1, lo1
    cdef uint64_t prod0, prod1
    cdef int r
    with nogil:
        for p in range(n):
            c0 = <uint32_t> (ids[p] & 0xFFFFFFFFu)
            c1 = <uint32_t> (ids[p] >> 32)
            c2 = step
            c3 = <uint32_t> (draws[0] if shared else draws[p])
            k0 = key0
            k1 = key1
            for r in range(10):
                if r:
                    k0 = k0 + 0x9E3779B9u
                    k1 = k1 + 0xBB67AE85u
                prod0 = <uint64_t> 0xD2511F53u * c0
                prod1 = <uint64_t> 0xCD9E8D57u * c2
                hi0 = <uint32_t> (prod0 >> 32)
                lo0 = <uint32_t> prod0
                hi1 = <uint32_t> (prod1 >> 32)
                lo1 = <uint32_t> prod1
                c0 = hi1 ^ c1 ^ k0
                c1 = lo1
                c2 = hi0 ^ c3 ^ k1
                c3 = lo0
            out1[p] = _unit(c0, c1)
            out2[p] = _unit(c2, c3)
