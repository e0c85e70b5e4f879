# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contract as the pure-Python fallback."""
import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef inline double _fmax(double a, double b) nogil:
    return a if a >= b else b


cdef inline void _rhs(double h1, double h2, double h3, double[:] p, double q1, double q2,
                      double th1, double th2, double* d) noexcept nogil:
    cdef double a1 = 1.0 if (h1 >= th1 or h2 >= th1) else 0.0
    cdef double a2 = 1.0 if (h2 >= th2 or h3 >= th2) else 0.0
    cdef double q12 = a1 / p[4] * (_fmax(h1, th1) - _fmax(h2, th1))
    cdef double q23 = a2 / p[5] * (_fmax(h2, th2) - _fmax(h3, th2))
    d[0] = (q1 - h1 / p[3] - q12) / p[0]
    d[1] = (q12 - q23) / p[1]
    d[2] = (q23 + q2 - h3 / p[6]) / p[2]


def integrate_tanks(h0, params, inputs, double ts, thresholds):
    cdef double[:, :, :] P = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[:, :] U = np.ascontiguousarray(inputs, dtype=np.float64)
    cdef Py_ssize_t n = U.shape[0]
    cdef double th1 = thresholds[0]
    cdef double th2 = thresholds[1]
    out_arr = np.zeros((n + 1, 3))
    modes_arr = np.zeros((n + 1, 2), dtype=np.uint8)
    cdef double[:, :] out = out_arr
    cdef unsigned char[:, :] modes = modes_arr
    cdef double h1 = h0[0]
    cdef double h2 = h0[1]
    cdef double h3 = h0[2]
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double q1, q2, half = 0.5 * ts
    cdef Py_ssize_t k, failed = -1
    out[0, 0] = h1
    out[0, 1] = h2
    out[0, 2] = h3
    with nogil:
        for k in range(n):
            q1 = U[k, 0]
            q2 = U[k, 1]
            _rhs(h1, h2, h3, P[k, 0], q1, q2, th1, th2, k1)
            _rhs(h1 + half * k1[0], h2 + half * k1[1], h3 + half * k1[2], P[k, 1], q1, q2, th1, th2, k2)
            _rhs(h1 + half * k2[0], h2 + half * k2[1], h3 + half * k2[2], P[k, 1], q1, q2, th1, th2, k3)
            _rhs(h1 + ts * k3[0], h2 + ts * k3[1], h3 + ts * k3[2], P[k, 2], q1, q2, th1, th2, k4)
            h1 += ts / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            h2 += ts / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            h3 += ts / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            if not (isfinite(h1) and isfinite(h2) and isfinite(h3)):
                failed = k
                break
            out[k + 1, 0] = h1
            out[k + 1, 1] = h2
            out[k + 1, 2] = h3
        for k in range(n + 1):
            modes[k, 0] = out[k, 0] >= th1 or out[k, 1] >= th1
            modes[k, 1] = out[k, 1] >= th2 or out[k, 2] >= th2
    return out_arr, modes_arr, failed


def persistence_mask(exceed, int window):
    cdef unsigned char[:, :] E = np.ascontiguousarray(exceed, dtype=np.uint8)
    cdef Py_ssize_t n = E.shape[0], m = E.shape[1], i, k
    out_arr = np.zeros((n, m), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    cdef long run
    with nogil:
        for i in range(m):
            run = 0
            for k in range(n):
                run = run + 1 if E[k, i] else 0
                out[k, i] = run >= window
    return out_arr
