"""Forward-mode dual scalars.

A DualScalar carries a value and a fixed-length tangent vector, one slot
per seeded input direction.  Arithmetic follows the exact dual rules,
e.g. (a, da) * (b, db) = (a*b, a*db + da*b), and every unary map g is
applied as (g(a), g'(a) * da).  The class is the scalar reference for
the batched tape in `diffengine`; the two are cross-checked in tests.
"""

import math

GUARD = 1e-12


class DualScalar:
    __slots__ = ("value", "tangents")

    def __init__(self, value, tangents):
        self.value = float(value)
        self.tangents = tuple(float(t) for t in tangents)

    @classmethod
    def constant(cls, value, width):
        return cls(value, (0.0,) * width)

    @classmethod
    def seed(cls, value, index, width):
        """Input variable: unit tangent in the given direction."""
        t = [0.0] * width
        t[index] = 1.0
        return cls(value, t)

    def _lift(self, other):
        if isinstance(other, DualScalar):
            if len(other.tangents) != len(self.tangents):
                raise ValueError("tangent width mismatch")
            return other
        return DualScalar.constant(other, len(self.tangents))

    def __repr__(self):
        return f"DualScalar({self.value}, {self.tangents})"

    def __add__(self, other):
        o = self._lift(other)
        return DualScalar(self.value + o.value,
                          [a + b for a, b in zip(self.tangents, o.tangents)])

    __radd__ = __add__

    def __neg__(self):
        return DualScalar(-self.value, [-a for a in self.tangents])

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        return DualScalar(
            self.value * o.value,
            [self.value * db + da * o.value
             for da, db in zip(self.tangents, o.tangents)],
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if abs(o.value) < GUARD:
            raise ZeroDivisionError("dual division: |denominator| below guard 1e-12")
        q = self.value / o.value
        return DualScalar(
            q,
            [(da - q * db) / o.value
             for da, db in zip(self.tangents, o.tangents)],
        )

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def _unary(self, g, dg):
        return DualScalar(g, [dg * a for a in self.tangents])


# The unary maps below also accept plain floats, so the same closure can
# be evaluated both in dual mode and pointwise for finite differencing.

def tanh(x):
    if not isinstance(x, DualScalar):
        return math.tanh(x)
    v = math.tanh(x.value)
    return x._unary(v, 1.0 - v * v)


def sigmoid(x):
    if not isinstance(x, DualScalar):
        return 1.0 / (1.0 + math.exp(-x))
    s = 1.0 / (1.0 + math.exp(-x.value))
    return x._unary(s, s * (1.0 - s))


def sin(x):
    if not isinstance(x, DualScalar):
        return math.sin(x)
    return x._unary(math.sin(x.value), math.cos(x.value))


def sqrt(x):
    v = x.value if isinstance(x, DualScalar) else x
    if v < GUARD:
        raise ZeroDivisionError("dual sqrt: argument below guard 1e-12")
    r = math.sqrt(v)
    if not isinstance(x, DualScalar):
        return r
    return x._unary(r, 0.5 / r)


def square(x):
    if not isinstance(x, DualScalar):
        return x * x
    return x._unary(x.value * x.value, 2.0 * x.value)


def absval(x):
    if not isinstance(x, DualScalar):
        return abs(x)
    s = 0.0 if x.value == 0.0 else math.copysign(1.0, x.value)
    return x._unary(abs(x.value), s)


def clamp(x, lo, hi):
    if lo >= hi:
        raise ValueError("clamp bounds must satisfy lo < hi")
    if not isinstance(x, DualScalar):
        return min(max(x, lo), hi)
    inside = 1.0 if lo <= x.value <= hi else 0.0
    return x._unary(min(max(x.value, lo), hi), inside)
