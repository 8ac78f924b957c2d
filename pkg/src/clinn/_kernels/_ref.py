"""NumPy reference implementation of the fused dual-number kernels.

Every kernel operates on C-contiguous float64 arrays of shape (K, M):
component 0 holds values, components 1..K-1 hold forward-mode tangents
seeded on the network inputs.  Forward kernels return a new array with
the dual rule applied; backward kernels accumulate (+=) the reverse-mode
contribution into the operand gradients.  The backward formulas fold in
the second derivative of each unary map, which is what makes gradients
of input-derivative expressions exact.

The Cython module `_fast` mirrors this API one to one.
"""

import numpy as np

GUARD = 1e-12

BACKEND_NAME = "py"


def _tangent_dot(g, a):
    # sum over tangent components: (K-1, M), (K-1, M) -> (M,)
    return np.einsum("km,km->m", g, a)


# -- unary kernels -------------------------------------------------------

def tanh_fwd(a):
    out = np.empty_like(a)
    np.tanh(a[0], out=out[0])
    if a.shape[0] > 1:
        d = 1.0 - out[0] * out[0]
        np.multiply(a[1:], d, out=out[1:])
    return out


def tanh_bwd(g, a, out, ga):
    v = out[0]
    d = 1.0 - v * v
    ga[0] += g[0] * d
    if a.shape[0] > 1:
        ga[1:] += g[1:] * d
        # d/dv of (1 - v^2) applied to the tangent rule: -2 v d
        ga[0] += (-2.0 * v * d) * _tangent_dot(g[1:], a[1:])


def sigmoid_fwd(a):
    out = np.empty_like(a)
    np.negative(a[0], out=out[0])
    np.exp(out[0], out=out[0])
    out[0] += 1.0
    np.reciprocal(out[0], out=out[0])
    if a.shape[0] > 1:
        s = out[0]
        np.multiply(a[1:], s * (1.0 - s), out=out[1:])
    return out


def sigmoid_bwd(g, a, out, ga):
    s = out[0]
    d = s * (1.0 - s)
    ga[0] += g[0] * d
    if a.shape[0] > 1:
        ga[1:] += g[1:] * d
        ga[0] += (d * (1.0 - 2.0 * s)) * _tangent_dot(g[1:], a[1:])


def sin_fwd(a):
    out = np.empty_like(a)
    np.sin(a[0], out=out[0])
    if a.shape[0] > 1:
        np.multiply(a[1:], np.cos(a[0]), out=out[1:])
    return out


def sin_bwd(g, a, out, ga):
    c = np.cos(a[0])
    ga[0] += g[0] * c
    if a.shape[0] > 1:
        ga[1:] += g[1:] * c
        ga[0] += (-out[0]) * _tangent_dot(g[1:], a[1:])


def sqrt_fwd(a):
    if np.any(a[0] < GUARD):
        raise ZeroDivisionError("sqrt kernel: argument below guard 1e-12")
    out = np.empty_like(a)
    np.sqrt(a[0], out=out[0])
    if a.shape[0] > 1:
        np.multiply(a[1:], 0.5 / out[0], out=out[1:])
    return out


def sqrt_bwd(g, a, out, ga):
    r = out[0]
    d = 0.5 / r
    ga[0] += g[0] * d
    if a.shape[0] > 1:
        ga[1:] += g[1:] * d
        ga[0] += (-0.25 / (r * r * r)) * _tangent_dot(g[1:], a[1:])


def square_fwd(a):
    out = np.empty_like(a)
    np.multiply(a[0], a[0], out=out[0])
    if a.shape[0] > 1:
        np.multiply(a[1:], 2.0 * a[0], out=out[1:])
    return out


def square_bwd(g, a, out, ga):
    ga[0] += 2.0 * g[0] * a[0]
    if a.shape[0] > 1:
        ga[1:] += g[1:] * (2.0 * a[0])
        ga[0] += 2.0 * _tangent_dot(g[1:], a[1:])


def abs_fwd(a):
    out = np.empty_like(a)
    np.abs(a[0], out=out[0])
    if a.shape[0] > 1:
        np.multiply(a[1:], np.sign(a[0]), out=out[1:])
    return out


def abs_bwd(g, a, out, ga):
    s = np.sign(a[0])
    ga[0] += g[0] * s
    if a.shape[0] > 1:
        ga[1:] += g[1:] * s


def clamp_fwd(a, lo, hi):
    out = np.empty_like(a)
    np.clip(a[0], lo, hi, out=out[0])
    if a.shape[0] > 1:
        m = ((a[0] >= lo) & (a[0] <= hi)).astype(np.float64)
        np.multiply(a[1:], m, out=out[1:])
    return out


def clamp_bwd(g, a, lo, hi, ga):
    m = ((a[0] >= lo) & (a[0] <= hi)).astype(np.float64)
    ga[0] += g[0] * m
    if a.shape[0] > 1:
        ga[1:] += g[1:] * m


# -- binary kernels ------------------------------------------------------

def mul_fwd(a, b):
    out = np.empty_like(a)
    np.multiply(a[0], b[0], out=out[0])
    if a.shape[0] > 1:
        out[1:] = a[0] * b[1:] + a[1:] * b[0]
    return out


def mul_bwd(g, a, b, out, ga, gb):
    ga[0] += g[0] * b[0]
    gb[0] += g[0] * a[0]
    if a.shape[0] > 1:
        ga[0] += _tangent_dot(g[1:], b[1:])
        gb[0] += _tangent_dot(g[1:], a[1:])
        ga[1:] += g[1:] * b[0]
        gb[1:] += g[1:] * a[0]


def div_fwd(a, b):
    if np.any(np.abs(b[0]) < GUARD):
        raise ZeroDivisionError("div kernel: |denominator| below guard 1e-12")
    out = np.empty_like(a)
    np.divide(a[0], b[0], out=out[0])
    if a.shape[0] > 1:
        out[1:] = (a[1:] - out[0] * b[1:]) / b[0]
    return out


def div_bwd(g, a, b, out, ga, gb):
    r = 1.0 / b[0]
    ga[0] += g[0] * r
    gb[0] += -g[0] * out[0] * r
    if a.shape[0] > 1:
        tb = _tangent_dot(g[1:], b[1:])
        tq = _tangent_dot(g[1:], out[1:])
        ga[0] += -tb * r * r
        ga[1:] += g[1:] * r
        gb[0] += (out[0] * tb * r - tq) * r
        gb[1:] += -g[1:] * out[0] * r
