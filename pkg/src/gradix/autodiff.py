"""Scalar computation-graph engine.

Reverse mode runs over a :class:`Tape` of :class:`Var` nodes. Forward mode is
layered on top with :class:`Dual` numbers whose primal *and* tangent are tape
variables, so the tangent (a directional input derivative) can itself be
differentiated with respect to parameters in one reverse sweep
(forward-over-reverse).

The module-level functions :func:`exp`, :func:`tanh`, :func:`sin`,
:func:`cos` and :func:`erf` dispatch on their argument and accept floats,
numpy arrays, :class:`Var` and :class:`Dual` alike. Exact solutions are written
against them once and evaluated under any of those types.
"""

import math

import numpy as np

from . import special
from .errors import DomainError, UsageError


def _div_value(a, b):
    if b == 0.0:
        raise DomainError("division by zero on tape")
    return a / b


def _rdiv_value(a, c):
    if a == 0.0:
        raise DomainError("division by zero on tape")
    return c / a


# op -> (value(parent_values, const), partials(parent_values, const, value))
_RULES = {
    "add": (lambda v, c: v[0] + v[1], lambda v, c, y: (1.0, 1.0)),
    "sub": (lambda v, c: v[0] - v[1], lambda v, c, y: (1.0, -1.0)),
    "mul": (lambda v, c: v[0] * v[1], lambda v, c, y: (v[1], v[0])),
    "div": (lambda v, c: _div_value(v[0], v[1]),
            lambda v, c, y: (1.0 / v[1], -y / v[1])),
    "addc": (lambda v, c: v[0] + c, lambda v, c, y: (1.0,)),
    "rsubc": (lambda v, c: c - v[0], lambda v, c, y: (-1.0,)),
    "mulc": (lambda v, c: v[0] * c, lambda v, c, y: (c,)),
    "rdivc": (lambda v, c: _rdiv_value(v[0], c), lambda v, c, y: (-y / v[0],)),
    "neg": (lambda v, c: -v[0], lambda v, c, y: (-1.0,)),
    "exp": (lambda v, c: math.exp(v[0]), lambda v, c, y: (y,)),
    "tanh": (lambda v, c: math.tanh(v[0]), lambda v, c, y: (1.0 - y * y,)),
    "sin": (lambda v, c: math.sin(v[0]), lambda v, c, y: (math.cos(v[0]),)),
    "cos": (lambda v, c: math.cos(v[0]), lambda v, c, y: (-math.sin(v[0]),)),
    "powi": (lambda v, c: v[0] ** c,
             lambda v, c, y: (c * v[0] ** (c - 1) if c != 0 else 0.0,)),
    "erf": (lambda v, c: special.erf(v[0]), lambda v, c, y: (special.erf_prime(v[0]),)),
}


class Tape:
    """Append-only, topologically ordered record of scalar operations."""

    __slots__ = ("values", "parents", "partials", "ops", "consts")

    def __init__(self):
        self.values = []
        self.parents = []
        self.partials = []
        self.ops = []
        self.consts = []

    def __len__(self):
        return len(self.values)

    def lift(self, value):
        """Record a leaf holding ``value``."""
        return self._leaf(float(value))

    def _leaf(self, value):
        self.values.append(value)
        self.parents.append(())
        self.partials.append(())
        self.ops.append("leaf")
        self.consts.append(None)
        return Var(self, len(self.values) - 1)

    def record(self, op, parents, const=None):
        value_fn, partial_fn = _RULES[op]
        pv = tuple(self.values[p] for p in parents)
        y = value_fn(pv, const)
        self.values.append(y)
        self.parents.append(tuple(parents))
        self.partials.append(partial_fn(pv, const, y))
        self.ops.append(op)
        self.consts.append(const)
        return Var(self, len(self.values) - 1)

    def replay(self, leaf_values=None):
        """Recompute every node value from the leaves.

        ``leaf_values`` maps leaf indices to replacement values; leaves not
        listed keep their recorded value.
        """
        leaf_values = leaf_values or {}
        out = []
        for i, op in enumerate(self.ops):
            if op == "leaf":
                out.append(float(leaf_values.get(i, self.values[i])))
                continue
            pv = tuple(out[p] for p in self.parents[i])
            out.append(_RULES[op][0](pv, self.consts[i]))
        return out


def _same_tape(a, b):
    if a.tape is not b.tape:
        raise UsageError("operands live on different tapes")


def _is_const(x):
    return isinstance(x, (int, float, np.floating, np.integer))


class Var:
    """Handle to one node of a tape."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def value(self):
        return self.tape.values[self.index]

    def __repr__(self):
        return f"Var({self.value!r}, node={self.index})"

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        if isinstance(other, Var):
            _same_tape(self, other)
            return self.tape.record("add", (self.index, other.index))
        if isinstance(other, Dual):
            return NotImplemented
        if other == 0:
            return self
        return self.tape.record("addc", (self.index,), float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            _same_tape(self, other)
            return self.tape.record("sub", (self.index, other.index))
        if isinstance(other, Dual):
            return NotImplemented
        if other == 0:
            return self
        return self.tape.record("addc", (self.index,), -float(other))

    def __rsub__(self, other):
        return self.tape.record("rsubc", (self.index,), float(other))

    def __mul__(self, other):
        if isinstance(other, Var):
            _same_tape(self, other)
            return self.tape.record("mul", (self.index, other.index))
        if isinstance(other, Dual):
            return NotImplemented
        if other == 1:
            return self
        return self.tape.record("mulc", (self.index,), float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            _same_tape(self, other)
            return self.tape.record("div", (self.index, other.index))
        if isinstance(other, Dual):
            return NotImplemented
        if other == 0:
            raise DomainError("division by zero")
        return self.tape.record("mulc", (self.index,), 1.0 / float(other))

    def __rtruediv__(self, other):
        return self.tape.record("rdivc", (self.index,), float(other))

    def __neg__(self):
        return self.tape.record("neg", (self.index,))

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise UsageError("only integer powers are supported")
        return self.tape.record("powi", (self.index,), int(n))


class Dual:
    """Primal/tangent pair; either field may be a :class:`Var` or a float."""

    __slots__ = ("primal", "tangent")
    __array_ufunc__ = None

    def __init__(self, primal, tangent=0.0):
        self.primal = primal
        self.tangent = tangent

    def __repr__(self):
        return f"Dual({value_of(self.primal)!r}, {value_of(self.tangent)!r})"

    @staticmethod
    def _coerce(x):
        return x if isinstance(x, Dual) else Dual(x, 0.0)

    def __add__(self, other):
        o = Dual._coerce(other)
        return Dual(self.primal + o.primal, self.tangent + o.tangent)

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual._coerce(other)
        return Dual(self.primal - o.primal, self.tangent - o.tangent)

    def __rsub__(self, other):
        return Dual._coerce(other) - self

    def __mul__(self, other):
        if _is_const(other) or isinstance(other, Var):
            return Dual(self.primal * other, self.tangent * other)
        o = Dual._coerce(other)
        return Dual(self.primal * o.primal,
                    self.tangent * o.primal + self.primal * o.tangent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_const(other):
            if other == 0:
                raise DomainError("division by zero")
            return Dual(self.primal / other, self.tangent / other)
        o = Dual._coerce(other)
        if value_of(o.primal) == 0.0:
            raise DomainError("division by zero")
        q = self.primal / o.primal
        return Dual(q, (self.tangent - q * o.tangent) / o.primal)

    def __rtruediv__(self, other):
        return Dual._coerce(other) / self

    def __neg__(self):
        return Dual(-self.primal, -self.tangent)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise UsageError("only integer powers are supported")
        if n == 0:
            return Dual(1.0, 0.0)
        return Dual(_pow(self.primal, n), n * _pow(self.primal, n - 1) * self.tangent)


def _pow(x, n):
    if n == 1:
        return x
    if isinstance(x, Var):
        return x ** n
    return float(x) ** n


def value_of(x):
    """Numeric value of a float, :class:`Var` or :class:`Dual` (its primal)."""
    if isinstance(x, Dual):
        return value_of(x.primal)
    if isinstance(x, Var):
        return x.value
    return x


def lift(tape, value):
    """Leaf node on ``tape``; constants have zero gradient."""
    return tape.lift(value)


def _unary(name, npfn, mathfn, deriv):
    def fn(x):
        if isinstance(x, Dual):
            p = fn(x.primal)
            return Dual(p, deriv(x.primal, p) * x.tangent)
        if isinstance(x, Var):
            return x.tape.record(name, (x.index,))
        if isinstance(x, np.ndarray):
            return npfn(x)
        return mathfn(float(x))

    fn.__name__ = name
    fn.__qualname__ = name
    return fn


exp = _unary("exp", np.exp, math.exp, lambda x, y: y)
tanh = _unary("tanh", np.tanh, math.tanh, lambda x, y: 1.0 - y * y)
sin = _unary("sin", np.sin, math.sin, lambda x, y: cos(x))
cos = _unary("cos", np.cos, math.cos, lambda x, y: -sin(x))
erf = _unary("erf", special.erf, special.erf, lambda x, y: special.TWO_OVER_SQRT_PI * exp(-(x * x)))

exp.__doc__ = "Exponential for float, ndarray, Var or Dual."
tanh.__doc__ = "Hyperbolic tangent for float, ndarray, Var or Dual."
sin.__doc__ = "Sine for float, ndarray, Var or Dual."
cos.__doc__ = "Cosine for float, ndarray, Var or Dual."
erf.__doc__ = """Error function for float, ndarray, Var or Dual.

The primal uses the rational approximation in :mod:`gradix.special`; the
derivative is the analytic ``2/sqrt(pi) exp(-x^2)``.
"""


def reverse_gradient(output, leaves):
    """Gradient of ``output`` with respect to each leaf, by one reverse sweep.

    The tape is left untouched. Leaves recorded after ``output`` (and plain
    constants as output) get zero gradient.
    """
    if not isinstance(output, Var):
        return [0.0] * len(leaves)
    tape = output.tape
    for leaf in leaves:
        if not isinstance(leaf, Var) or leaf.tape is not tape:
            raise UsageError("leaf is not a node of the output's tape")
    adj = [0.0] * (output.index + 1)
    adj[output.index] = 1.0
    parents, partials = tape.parents, tape.partials
    for i in range(output.index, -1, -1):
        a = adj[i]
        if a == 0.0:
            continue
        for p, d in zip(parents[i], partials[i]):
            adj[p] += a * d
    return [adj[leaf.index] if leaf.index <= output.index else 0.0 for leaf in leaves]


def input_derivative(f, point, direction, tape=None):
    """Evaluate ``f`` at ``point`` seeded along ``direction``.

    Returns a :class:`Dual` whose tangent is the directional derivative of
    ``f``. Point and direction are lifted onto ``tape`` so the tangent is a
    tape variable and can be fed to :func:`reverse_gradient`.
    """
    point = list(point)
    direction = list(direction)
    if len(point) != len(direction):
        raise UsageError(f"point has {len(point)} coordinates, direction {len(direction)}")
    tape = Tape() if tape is None else tape
    xs = [Dual(tape.lift(p), tape.lift(v)) for p, v in zip(point, direction)]
    return as_dual(f(xs), tape)


def as_dual(y, tape):
    """Promote a float/Var/Dual result to a Dual with Var fields."""
    if not isinstance(y, Dual):
        y = Dual(y, 0.0)
    p, t = y.primal, y.tangent
    if not isinstance(p, Var):
        p = tape.lift(p)
    if not isinstance(t, Var):
        t = tape.lift(t)
    return Dual(p, t)
