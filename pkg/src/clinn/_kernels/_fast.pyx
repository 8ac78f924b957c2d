# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython implementation of the fused dual-number kernels.

Mirrors `_ref` exactly: arrays are (K, M) C-contiguous float64, component
0 is the value, the rest are input tangents.  Each kernel is a single
fused pass per element, which avoids the temporaries the NumPy backend
allocates for the tangent and second-derivative factors.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport tanh as c_tanh, exp as c_exp, sin as c_sin, cos as c_cos
from libc.math cimport sqrt as c_sqrt, fabs

cnp.import_array()

DEF GUARD = 1e-12

BACKEND_NAME = "cy"


cdef inline double _sign(double x) nogil:
    if x > 0.0:
        return 1.0
    elif x < 0.0:
        return -1.0
    return 0.0


# -- unary kernels -------------------------------------------------------

def tanh_fwd(cnp.ndarray[double, ndim=2, mode="c"] a):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double v, d
    # numpy's vectorized tanh beats a scalar libm loop by an order of
    # magnitude on long rows; keep the chain-rule rows in C.
    np.tanh(a[0], out=out[0])
    if K > 1:
        with nogil:
            for m in range(M):
                v = out[0, m]
                d = 1.0 - v * v
                for k in range(1, K):
                    out[k, m] = d * a[k, m]
    return out


def tanh_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
             cnp.ndarray[double, ndim=2, mode="c"] a,
             cnp.ndarray[double, ndim=2, mode="c"] out,
             cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double v, d, acc
    for m in range(M):
        v = out[0, m]
        d = 1.0 - v * v
        acc = g[0, m] * d
        for k in range(1, K):
            ga[k, m] += g[k, m] * d
            acc += (-2.0 * v * d) * g[k, m] * a[k, m]
        ga[0, m] += acc


def sigmoid_fwd(cnp.ndarray[double, ndim=2, mode="c"] a):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double s, d
    for m in range(M):
        s = 1.0 / (1.0 + c_exp(-a[0, m]))
        out[0, m] = s
        d = s * (1.0 - s)
        for k in range(1, K):
            out[k, m] = d * a[k, m]
    return out


def sigmoid_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
                cnp.ndarray[double, ndim=2, mode="c"] a,
                cnp.ndarray[double, ndim=2, mode="c"] out,
                cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double s, d, dd, acc
    for m in range(M):
        s = out[0, m]
        d = s * (1.0 - s)
        dd = d * (1.0 - 2.0 * s)
        acc = g[0, m] * d
        for k in range(1, K):
            ga[k, m] += g[k, m] * d
            acc += dd * g[k, m] * a[k, m]
        ga[0, m] += acc


def sin_fwd(cnp.ndarray[double, ndim=2, mode="c"] a):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double c
    for m in range(M):
        out[0, m] = c_sin(a[0, m])
        c = c_cos(a[0, m])
        for k in range(1, K):
            out[k, m] = c * a[k, m]
    return out


def sin_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
            cnp.ndarray[double, ndim=2, mode="c"] a,
            cnp.ndarray[double, ndim=2, mode="c"] out,
            cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double c, acc
    for m in range(M):
        c = c_cos(a[0, m])
        acc = g[0, m] * c
        for k in range(1, K):
            ga[k, m] += g[k, m] * c
            acc += (-out[0, m]) * g[k, m] * a[k, m]
        ga[0, m] += acc


def sqrt_fwd(cnp.ndarray[double, ndim=2, mode="c"] a):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    for m in range(M):
        if a[0, m] < GUARD:
            raise ZeroDivisionError("sqrt kernel: argument below guard 1e-12")
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef double r, d
    for m in range(M):
        r = c_sqrt(a[0, m])
        out[0, m] = r
        d = 0.5 / r
        for k in range(1, K):
            out[k, m] = d * a[k, m]
    return out


def sqrt_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
             cnp.ndarray[double, ndim=2, mode="c"] a,
             cnp.ndarray[double, ndim=2, mode="c"] out,
             cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double r, d, acc
    for m in range(M):
        r = out[0, m]
        d = 0.5 / r
        acc = g[0, m] * d
        for k in range(1, K):
            ga[k, m] += g[k, m] * d
            acc += (-0.25 / (r * r * r)) * g[k, m] * a[k, m]
        ga[0, m] += acc


def square_fwd(cnp.ndarray[double, ndim=2, mode="c"] a):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double v
    for m in range(M):
        v = a[0, m]
        out[0, m] = v * v
        for k in range(1, K):
            out[k, m] = 2.0 * v * a[k, m]
    return out


def square_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
               cnp.ndarray[double, ndim=2, mode="c"] a,
               cnp.ndarray[double, ndim=2, mode="c"] out,
               cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double v, acc
    for m in range(M):
        v = a[0, m]
        acc = 2.0 * g[0, m] * v
        for k in range(1, K):
            ga[k, m] += g[k, m] * 2.0 * v
            acc += 2.0 * g[k, m] * a[k, m]
        ga[0, m] += acc


def abs_fwd(cnp.ndarray[double, ndim=2, mode="c"] a):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double s
    for m in range(M):
        out[0, m] = fabs(a[0, m])
        s = _sign(a[0, m])
        for k in range(1, K):
            out[k, m] = s * a[k, m]
    return out


def abs_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
            cnp.ndarray[double, ndim=2, mode="c"] a,
            cnp.ndarray[double, ndim=2, mode="c"] out,
            cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double s
    for m in range(M):
        s = _sign(a[0, m])
        ga[0, m] += g[0, m] * s
        for k in range(1, K):
            ga[k, m] += g[k, m] * s


def clamp_fwd(cnp.ndarray[double, ndim=2, mode="c"] a, double lo, double hi):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double v, mask
    for m in range(M):
        v = a[0, m]
        if v < lo:
            out[0, m] = lo
            mask = 0.0
        elif v > hi:
            out[0, m] = hi
            mask = 0.0
        else:
            out[0, m] = v
            mask = 1.0
        for k in range(1, K):
            out[k, m] = mask * a[k, m]
    return out


def clamp_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
              cnp.ndarray[double, ndim=2, mode="c"] a,
              double lo, double hi,
              cnp.ndarray[double, ndim=2, mode="c"] ga):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double mask
    for m in range(M):
        mask = 1.0 if (a[0, m] >= lo and a[0, m] <= hi) else 0.0
        ga[0, m] += g[0, m] * mask
        for k in range(1, K):
            ga[k, m] += g[k, m] * mask


# -- binary kernels ------------------------------------------------------

def mul_fwd(cnp.ndarray[double, ndim=2, mode="c"] a,
            cnp.ndarray[double, ndim=2, mode="c"] b):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    for m in range(M):
        out[0, m] = a[0, m] * b[0, m]
        for k in range(1, K):
            out[k, m] = a[0, m] * b[k, m] + a[k, m] * b[0, m]
    return out


def mul_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
            cnp.ndarray[double, ndim=2, mode="c"] a,
            cnp.ndarray[double, ndim=2, mode="c"] b,
            cnp.ndarray[double, ndim=2, mode="c"] out,
            cnp.ndarray[double, ndim=2, mode="c"] ga,
            cnp.ndarray[double, ndim=2, mode="c"] gb):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double acca, accb
    for m in range(M):
        acca = g[0, m] * b[0, m]
        accb = g[0, m] * a[0, m]
        for k in range(1, K):
            acca += g[k, m] * b[k, m]
            accb += g[k, m] * a[k, m]
            ga[k, m] += g[k, m] * b[0, m]
            gb[k, m] += g[k, m] * a[0, m]
        ga[0, m] += acca
        gb[0, m] += accb


def div_fwd(cnp.ndarray[double, ndim=2, mode="c"] a,
            cnp.ndarray[double, ndim=2, mode="c"] b):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    for m in range(M):
        if fabs(b[0, m]) < GUARD:
            raise ZeroDivisionError("div kernel: |denominator| below guard 1e-12")
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(a)
    cdef double q
    for m in range(M):
        q = a[0, m] / b[0, m]
        out[0, m] = q
        for k in range(1, K):
            out[k, m] = (a[k, m] - q * b[k, m]) / b[0, m]
    return out


def div_bwd(cnp.ndarray[double, ndim=2, mode="c"] g,
            cnp.ndarray[double, ndim=2, mode="c"] a,
            cnp.ndarray[double, ndim=2, mode="c"] b,
            cnp.ndarray[double, ndim=2, mode="c"] out,
            cnp.ndarray[double, ndim=2, mode="c"] ga,
            cnp.ndarray[double, ndim=2, mode="c"] gb):
    cdef Py_ssize_t K = a.shape[0], M = a.shape[1], k, m
    cdef double r, tb, tq, acc
    for m in range(M):
        r = 1.0 / b[0, m]
        ga[0, m] += g[0, m] * r
        gb[0, m] += -g[0, m] * out[0, m] * r
        if K > 1:
            tb = 0.0
            tq = 0.0
            for k in range(1, K):
                tb += g[k, m] * b[k, m]
                tq += g[k, m] * out[k, m]
                ga[k, m] += g[k, m] * r
                gb[k, m] += -g[k, m] * out[0, m] * r
            ga[0, m] += -tb * r * r
            gb[0, m] += (out[0, m] * tb * r - tq) * r
