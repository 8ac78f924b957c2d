"""Differentiation backbone.

Two cooperating mechanisms:

* forward-mode dual components over the network inputs, giving exact
  first derivatives of the prediction for the PDE residual, and
* a reverse-mode tape over the parameters, recorded through the dual
  arithmetic, so any scalar loss built from the supported primitives is
  differentiable with respect to every parameter.

Tape values are C-contiguous float64 arrays of shape (K, B, n): K dual
components (component 0 is the value, the rest are input tangents), B
batch rows, n features.  The fused elementwise kernels live in
`clinn._kernels` with a NumPy and a compiled backend; structural
operations (affine maps, gathers, reductions) stay in NumPy here.

A Tape is single-use: build the graph, call backward once, read the
gradients, discard.  Everything is deterministic for fixed inputs.
"""

import numpy as np

from . import _kernels
from .dual import DualScalar
from . import dual as _dual

__all__ = [
    "DualScalar", "Tape", "Var", "NumericalError", "register_params",
    "forward_on_tape", "eval_with_input_grads", "loss_gradient",
    "collect_gradient", "finite_diff_check",
    "add", "sub", "mul", "div", "tanh", "sigmoid", "sine", "sqrt",
    "square", "absval", "clamp", "scale_shift", "affine", "extract",
    "gather", "extfun", "extfun2", "wsum",
]


class NumericalError(ArithmeticError):
    """Non-finite intermediate or guarded denominator in the engine."""


def _as3d(arr):
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"tape values must be (K, B, n); got shape {a.shape}")
    return a


class Var:
    """Handle to one tape node."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape, idx):
        self.tape = tape
        self.idx = idx

    @property
    def val(self):
        return self.tape.nodes[self.idx].val

    @property
    def shape(self):
        return self.val.shape

    # arithmetic sugar; scalars enter through scale_shift
    def __add__(self, other):
        if isinstance(other, Var):
            return add(self, other)
        return scale_shift(self, 1.0, float(other))

    __radd__ = __add__

    def __neg__(self):
        return scale_shift(self, -1.0, 0.0)

    def __sub__(self, other):
        if isinstance(other, Var):
            return sub(self, other)
        return scale_shift(self, 1.0, -float(other))

    def __rsub__(self, other):
        return scale_shift(self, -1.0, float(other))

    def __mul__(self, other):
        if isinstance(other, Var):
            return mul(self, other)
        return scale_shift(self, float(other), 0.0)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return div(self, other)
        return scale_shift(self, 1.0 / float(other), 0.0)


class _Node:
    __slots__ = ("kind", "args", "val", "aux", "grad", "ng")

    def __init__(self, kind, args, val, aux, ng):
        self.kind = kind
        self.args = args
        self.val = val
        self.aux = aux
        self.grad = None
        self.ng = ng


class Tape:
    """Append-only record of operations; replayed backward for gradients."""

    def __init__(self):
        self.nodes = []
        self.param_leaves = []
        self._done = False

    def _push(self, kind, args, val, aux=None, ng=None):
        if self._done:
            raise RuntimeError("tape already replayed; build a fresh one")
        if ng is None:
            ng = any(self.nodes[i].ng for i in args)
        self.nodes.append(_Node(kind, args, val, aux, ng))
        return Var(self, len(self.nodes) - 1)

    def const(self, arr):
        return self._push("const", (), _as3d(arr), ng=False)

    def param(self, arr):
        """Parameter leaf; kept in its natural (matrix/vector) shape."""
        a = np.ascontiguousarray(arr, dtype=np.float64)
        v = self._push("param", (), a, ng=True)
        self.param_leaves.append(v.idx)
        return v

    def dual_input(self, X, tangents=True):
        """Input node for B points in m coordinates, shape (K, B, m).

        With tangents, component c carries the unit direction of input
        column c-1, so the network output exposes d/dx_c directly.
        """
        X = np.ascontiguousarray(X, dtype=np.float64)
        B, m = X.shape
        K = m + 1 if tangents else 1
        val = np.zeros((K, B, m))
        val[0] = X
        for c in range(1, K):
            val[c, :, c - 1] = 1.0
        return self._push("const", (), val, ng=False)

    def backward(self, root):
        """Reverse sweep from a scalar root; fills parameter gradients."""
        if self._done:
            raise RuntimeError("tape already replayed; build a fresh one")
        self._done = True
        nodes = self.nodes
        rnode = nodes[root.idx]
        if rnode.val.size != 1:
            raise ValueError("backward root must be a scalar node")
        rnode.grad = np.ones_like(rnode.val)
        K = _kernels.active()
        for idx in range(root.idx, -1, -1):
            node = nodes[idx]
            if node.grad is None or node.kind in ("const", "param"):
                continue
            args = [nodes[i] for i in node.args]
            _BACKWARD[node.kind](K, node, args)
            node.grad = None  # free as we go

    def grad_of(self, var):
        g = self.nodes[var.idx].grad
        if g is None:
            return np.zeros_like(self.nodes[var.idx].val)
        return g


def _flat2(a):
    # (K, B, n) -> (K, B*n) view for the elementwise kernels
    return a.reshape(a.shape[0], -1)


def _unary(kind, kfwd):
    def op(x):
        k = _kernels.active()
        a = x.val
        out = getattr(k, kfwd)(_flat2(a)).reshape(a.shape)
        return x.tape._push(kind, (x.idx,), out)

    return op


tanh = _unary("tanh", "tanh_fwd")
sigmoid = _unary("sigmoid", "sigmoid_fwd")
sine = _unary("sin", "sin_fwd")
square = _unary("square", "square_fwd")
absval = _unary("abs", "abs_fwd")


def sqrt(x):
    k = _kernels.active()
    a = x.val
    try:
        out = k.sqrt_fwd(_flat2(a)).reshape(a.shape)
    except ZeroDivisionError as exc:
        raise NumericalError(str(exc)) from None
    return x.tape._push("sqrt", (x.idx,), out)


def clamp(x, lo, hi):
    if not lo < hi:
        raise ValueError("clamp bounds must satisfy lo < hi")
    k = _kernels.active()
    a = x.val
    out = k.clamp_fwd(_flat2(a), float(lo), float(hi)).reshape(a.shape)
    return x.tape._push("clamp", (x.idx,), out, aux=(float(lo), float(hi)))


def _binary_check(x, y):
    if x.tape is not y.tape:
        raise ValueError("operands live on different tapes")
    if x.val.shape != y.val.shape:
        raise ValueError(f"shape mismatch {x.val.shape} vs {y.val.shape}")


def add(x, y):
    _binary_check(x, y)
    return x.tape._push("add", (x.idx, y.idx), x.val + y.val)


def sub(x, y):
    _binary_check(x, y)
    return x.tape._push("sub", (x.idx, y.idx), x.val - y.val)


def mul(x, y):
    _binary_check(x, y)
    k = _kernels.active()
    out = k.mul_fwd(_flat2(x.val), _flat2(y.val)).reshape(x.val.shape)
    return x.tape._push("mul", (x.idx, y.idx), out)


def div(x, y):
    _binary_check(x, y)
    k = _kernels.active()
    try:
        out = k.div_fwd(_flat2(x.val), _flat2(y.val)).reshape(x.val.shape)
    except ZeroDivisionError as exc:
        raise NumericalError(str(exc)) from None
    return x.tape._push("div", (x.idx, y.idx), out)


def scale_shift(x, alpha, beta):
    """alpha * x + beta; the shift touches only the value component."""
    out = x.val * alpha
    out[0] += beta
    return x.tape._push("scale", (x.idx,), out, aux=alpha)


def affine(x, W, b):
    """x (K,B,m) through the parameter maps W (n,m), b (n)."""
    K, B, m = x.val.shape
    y = (x.val.reshape(K * B, m) @ W.val.T).reshape(K, B, -1)
    y[0] += b.val
    return x.tape._push("affine", (x.idx, W.idx, b.idx), np.ascontiguousarray(y))


def extract(x, c):
    """Pull one dual component out as a value-only (K=1) quantity."""
    out = np.ascontiguousarray(x.val[c:c + 1])
    return x.tape._push("extract", (x.idx,), out, aux=c)


def gather(x, rows):
    rows = np.asarray(rows, dtype=np.intp)
    out = np.ascontiguousarray(x.val[:, rows, :])
    return x.tape._push("gather", (x.idx,), out, aux=rows)


def extfun(x, fn, dfn, name):
    """Pointwise external function with caller-supplied derivative.

    Value-only (K=1) quantities, used for problem data such as the
    characteristic speed and the initial profile inside the loss graph.
    """
    if x.val.shape[0] != 1:
        raise ValueError(f"extfun {name!r} expects a value-only operand")
    out = np.ascontiguousarray(fn(x.val[0]), dtype=np.float64)[None]
    if out.shape != x.val.shape:
        raise ValueError(f"extfun {name!r} changed the operand shape")
    return x.tape._push("extfun", (x.idx,), out, aux=(fn, dfn, name))


def extfun2(x, y, fn, dfns, name):
    """Two-argument pointwise external function (value-only operands)."""
    _binary_check(x, y)
    if x.val.shape[0] != 1:
        raise ValueError(f"extfun2 {name!r} expects value-only operands")
    out = np.ascontiguousarray(fn(x.val[0], y.val[0]), dtype=np.float64)[None]
    if out.shape != x.val.shape:
        raise ValueError(f"extfun2 {name!r} changed the operand shape")
    return x.tape._push("extfun2", (x.idx, y.idx), out, aux=(fn, dfns, name))


def wsum(x, weights):
    """Weighted sum over batch rows of a (1,B,1) quantity -> scalar node."""
    if x.val.shape[0] != 1 or x.val.shape[2] != 1:
        raise ValueError("wsum expects a (1, B, 1) operand")
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape != (x.val.shape[1],):
        raise ValueError("weight vector length mismatch")
    out = np.array([[[float(x.val[0, :, 0] @ w)]]])
    return x.tape._push("wsum", (x.idx,), out, aux=w)


# -- backward rules ------------------------------------------------------
#
# Gradients are allocated lazily: a node's first contribution either
# steals the upstream array (safe: the owner is cleared right after the
# rule runs) or assigns a freshly computed one, and later contributions
# accumulate in place.  The accumulate-style kernels still need a zeroed
# buffer, which _acc provides on first touch.

def _acc(a):
    if a.grad is None:
        a.grad = np.zeros_like(a.val)
    return a.grad


def _bwd_unary(kname):
    def rule(K, node, args):
        (a,) = args
        if a.ng:
            getattr(K, kname)(_flat2(node.grad), _flat2(a.val),
                              _flat2(node.val), _flat2(_acc(a)))

    return rule


def _bwd_clamp(K, node, args):
    (a,) = args
    if a.ng:
        lo, hi = node.aux
        K.clamp_bwd(_flat2(node.grad), _flat2(a.val), lo, hi,
                    _flat2(_acc(a)))


def _bwd_add(K, node, args):
    a, b = args
    g = node.grad
    stolen = False
    if a.ng:
        if a.grad is None:
            a.grad = g
            stolen = True
        else:
            a.grad += g
    if b.ng:
        if b.grad is None:
            b.grad = g.copy() if stolen else g
        else:
            b.grad += g


def _bwd_sub(K, node, args):
    a, b = args
    g = node.grad
    if b.ng:
        if b.grad is None:
            b.grad = -g  # fresh array, so the steal below cannot alias it
        else:
            b.grad -= g
    if a.ng:
        if a.grad is None:
            a.grad = g
        else:
            a.grad += g


def _bwd_mul(K, node, args):
    a, b = args
    ga = _acc(a) if a.ng else np.zeros_like(a.val)
    gb = _acc(b) if b.ng else np.zeros_like(b.val)
    K.mul_bwd(_flat2(node.grad), _flat2(a.val), _flat2(b.val),
              _flat2(node.val), _flat2(ga), _flat2(gb))


def _bwd_div(K, node, args):
    a, b = args
    ga = _acc(a) if a.ng else np.zeros_like(a.val)
    gb = _acc(b) if b.ng else np.zeros_like(b.val)
    K.div_bwd(_flat2(node.grad), _flat2(a.val), _flat2(b.val),
              _flat2(node.val), _flat2(ga), _flat2(gb))


def _bwd_scale(K, node, args):
    (a,) = args
    if a.ng:
        if a.grad is None:
            a.grad = node.aux * node.grad
        else:
            a.grad += node.aux * node.grad


def _bwd_affine(K, node, args):
    x, W, b = args
    g = node.grad
    Kc, B, n = g.shape
    m = x.val.shape[2]
    g2 = g.reshape(Kc * B, n)
    if x.ng:
        gx = (g2 @ W.val).reshape(Kc, B, m)
        if x.grad is None:
            x.grad = gx
        else:
            x.grad += gx
    if W.ng:
        gW = g2.T @ x.val.reshape(Kc * B, m)
        if W.grad is None:
            W.grad = gW
        else:
            W.grad += gW
    if b.ng:
        gb = g.sum(axis=1)[0]
        if b.grad is None:
            b.grad = gb
        else:
            b.grad += gb


def _bwd_extract(K, node, args):
    (a,) = args
    if a.ng:
        _acc(a)[node.aux] += node.grad[0]


def _bwd_gather(K, node, args):
    (a,) = args
    if a.ng:
        np.add.at(_acc(a), (slice(None), node.aux), node.grad)


def _bwd_extfun(K, node, args):
    (a,) = args
    if a.ng:
        _, dfn, _ = node.aux
        _acc(a)[0] += node.grad[0] * dfn(a.val[0])


def _bwd_extfun2(K, node, args):
    a, b = args
    _, (dfa, dfb), _ = node.aux
    if a.ng:
        _acc(a)[0] += node.grad[0] * dfa(a.val[0], b.val[0])
    if b.ng:
        _acc(b)[0] += node.grad[0] * dfb(a.val[0], b.val[0])


def _bwd_wsum(K, node, args):
    (a,) = args
    if a.ng:
        _acc(a)[0, :, 0] += node.grad[0, 0, 0] * node.aux


_BACKWARD = {
    "tanh": _bwd_unary("tanh_bwd"),
    "sigmoid": _bwd_unary("sigmoid_bwd"),
    "sin": _bwd_unary("sin_bwd"),
    "sqrt": _bwd_unary("sqrt_bwd"),
    "square": _bwd_unary("square_bwd"),
    "abs": _bwd_unary("abs_bwd"),
    "clamp": _bwd_clamp,
    "add": _bwd_add,
    "sub": _bwd_sub,
    "mul": _bwd_mul,
    "div": _bwd_div,
    "scale": _bwd_scale,
    "affine": _bwd_affine,
    "extract": _bwd_extract,
    "gather": _bwd_gather,
    "extfun": _bwd_extfun,
    "extfun2": _bwd_extfun2,
    "wsum": _bwd_wsum,
}


# -- network on tape -----------------------------------------------------

class TapeParams:
    """Parameter leaves of one network registered on a tape."""

    __slots__ = ("lift", "blocks", "proj", "leaves")

    def __init__(self, lift, blocks, proj):
        self.lift = lift
        self.blocks = blocks
        self.proj = proj
        self.leaves = [*lift, *(v for pair in blocks for v in pair), *proj]


def register_params(tape, params):
    """Register every affine map of a NetworkParams as tape leaves."""
    lift = (tape.param(params.lift.W), tape.param(params.lift.b))
    blocks = [(tape.param(bl.W), tape.param(bl.b)) for bl in params.blocks]
    proj = (tape.param(params.proj.W), tape.param(params.proj.b))
    return TapeParams(lift, blocks, proj)


def forward_on_tape(tape, pv, X, input_tangents=True):
    """Residual-network forward over B points; returns the (K,B,1) output.

    The final value component is checked for finiteness; on failure the
    forward is replayed layer by layer to name the offending layer.
    """
    x = tape.dual_input(X, tangents=input_tangents)
    v = affine(x, *pv.lift)
    for Wb in pv.blocks:
        v = add(v, tanh(affine(v, *Wb)))
    u = affine(v, *pv.proj)
    if not np.isfinite(u.val).all():
        _name_nonfinite_layer(pv, X)
        raise NumericalError("non-finite network output")  # pragma: no cover
    return u


def _name_nonfinite_layer(pv, X):
    with np.errstate(all="ignore"):
        v = X @ pv.lift[0].val.T + pv.lift[1].val
        if not np.isfinite(v).all():
            raise NumericalError("non-finite values after layer 0 (lift)")
        for k, (W, b) in enumerate(pv.blocks):
            v = v + np.tanh(v @ W.val.T + b.val)
            if not np.isfinite(v).all():
                raise NumericalError(
                    f"non-finite values after layer {k + 1} (block {k})")
        v = v @ pv.proj[0].val.T + pv.proj[1].val
        if not np.isfinite(v).all():
            raise NumericalError(
                f"non-finite values after layer {len(pv.blocks) + 1} (projection)")


def collect_gradient(tape, pv):
    """Flat gradient vector in canonical parameter order."""
    return np.concatenate([tape.grad_of(v).ravel() for v in pv.leaves])


def loss_gradient(closure, params):
    """Gradient of a scalar loss closure with respect to all parameters.

    The closure receives (tape, tape_params) and must return a scalar
    Var built from the supported primitives.
    """
    tape = Tape()
    pv = register_params(tape, params)
    root = closure(tape, pv)
    tape.backward(root)
    return collect_gradient(tape, pv)


# -- per-point dual evaluation -------------------------------------------

def _scalar_forward(params, pt):
    """Network forward on a list of scalars (floats or DualScalars)."""
    v = [sum(W_row[j] * pt[j] for j in range(len(pt))) + bi
         for W_row, bi in zip(params.lift.W, params.lift.b)]
    for bl in params.blocks:
        z = [_dual.tanh(sum(W_row[j] * v[j] for j in range(len(v))) + bi)
             for W_row, bi in zip(bl.W, bl.b)]
        v = [a + b for a, b in zip(v, z)]
    (row,), (b0,) = params.proj.W, params.proj.b
    return sum(row[j] * v[j] for j in range(len(v))) + b0


def eval_with_input_grads(params, point):
    """Exact (u, du_dx vector, du_dt) at one space-time point."""
    pt = [float(c) for c in point]
    m = len(pt)
    duals = [DualScalar.seed(c, i, m) for i, c in enumerate(pt)]
    out = _scalar_forward(params, duals)
    if not np.isfinite(out.value):
        # replay in batch form to produce the layer-naming diagnostic
        tape = Tape()
        forward_on_tape(tape, register_params(tape, params),
                        np.asarray([pt]), input_tangents=False)
        raise NumericalError("non-finite network output")  # pragma: no cover
    return out.value, np.array(out.tangents[:m - 1]), out.tangents[m - 1]


def finite_diff_check(f, point, step):
    """Max relative gap between f's dual gradient and central differences.

    f must accept a sequence of scalars that may be floats or
    DualScalars (the `dual` module functions handle both).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    pt = [float(c) for c in point]
    n = len(pt)
    res = f([DualScalar.seed(c, i, n) for i, c in enumerate(pt)])
    analytic = list(res.tangents) if isinstance(res, DualScalar) else [0.0] * n
    worst = 0.0
    for i in range(n):
        hi = list(pt)
        lo = list(pt)
        hi[i] += step
        lo[i] -= step
        central = (float(f(hi)) - float(f(lo))) / (2.0 * step)
        gap = abs(analytic[i] - central) / max(1.0, abs(analytic[i]))
        worst = max(worst, gap)
    return worst
