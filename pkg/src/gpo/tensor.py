"""Reverse-mode automatic differentiation on dense float64 arrays.

A :class:`Tape` records primitive operations in execution order. Each node
keeps its forward value, the indices of its parents and a vector-Jacobian
product closure. :meth:`Tape.backward` walks the nodes once in reverse,
which is a valid reverse topological order because parents are always
recorded before their children.

Operations on values that are not attached to a tape (plain arrays or
untracked tensors) run eagerly and record nothing, so the same model code
serves both training and inference.

Example
-------
>>> tape = Tape()
>>> x = tape.param(np.array([1.0, 2.0, 3.0]), "x")
>>> loss = sum(x * x)
>>> tape.backward(loss)["x"]
array([2., 4., 6.])
"""

import numpy as np
from scipy import special

from .errors import NumericalError, ShapeError, ValidationError

SQRT_GUARD = 1e-12


class Tensor:
    __slots__ = ("value", "tape", "index", "name")
    __array_priority__ = 100

    def __init__(self, value, tape=None, index=None, name=None):
        value = np.asarray(value, dtype=np.float64).view()
        value.flags.writeable = False
        self.value = value
        self.tape = tape
        self.index = index
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def tracked(self):
        return self.tape is not None

    def numpy(self):
        return np.array(self.value)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, tracked={self.tracked})"

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __neg__ = lambda self: scale(self, -1.0)
    __matmul__ = lambda self, o: matmul(self, o)
    __getitem__ = lambda self, key: getitem(self, key)


class _Node:
    __slots__ = ("op", "parents", "vjp", "shape")

    def __init__(self, op, parents, vjp, shape):
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.shape = shape


class Tape:
    """Ordered record of primitive operations."""

    def __init__(self):
        self.nodes = []
        self.leaves = {}

    def __len__(self):
        return len(self.nodes)

    def reset(self):
        self.nodes = []
        self.leaves = {}

    def param(self, value, name):
        """Register a differentiable leaf."""
        if name in self.leaves:
            raise ValidationError(f"duplicate parameter name {name!r}")
        value = np.array(value, dtype=np.float64)
        _check_finite("param", value)
        idx = len(self.nodes)
        self.nodes.append(_Node("leaf", (), None, value.shape))
        t = Tensor(value, self, idx, name)
        self.leaves[name] = t
        return t

    def params(self, arrays, prefix=""):
        return {k: self.param(v, prefix + k) for k, v in arrays.items()}

    def _record(self, op, value, parents, vjp):
        idx = len(self.nodes)
        self.nodes.append(_Node(op, tuple(parents), vjp, value.shape))
        return Tensor(value, self, idx)

    def backward(self, output):
        """Gradients of a scalar ``output`` with respect to every leaf.

        Returns a dict keyed by leaf name. Leaves the output does not depend
        on get zero arrays.
        """
        if not isinstance(output, Tensor) or output.tape is not self:
            raise ValidationError("backward: output is not recorded on this tape")
        if output.value.size != 1:
            raise ShapeError("backward", output.shape, detail="seed must be scalar")
        adj = [None] * (output.index + 1)
        adj[output.index] = np.ones(output.shape)
        for i in range(output.index, -1, -1):
            g = adj[i]
            node = self.nodes[i]
            if g is None or node.vjp is None:
                continue
            contribs = node.vjp(g)
            for p, c in zip(node.parents, contribs):
                if p is None or c is None:
                    continue
                adj[p] = c if adj[p] is None else adj[p] + c
        grads = {}
        for name, leaf in self.leaves.items():
            g = adj[leaf.index] if leaf.index < len(adj) else None
            grads[name] = np.zeros(leaf.shape) if g is None else np.asarray(g)
        return grads


# ---------------------------------------------------------------------------
# helpers


def _check_finite(op, value):
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"{op}: non-finite value produced")


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _common_tape(op, *ts):
    tape = None
    for t in ts:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ValidationError(f"{op}: operands live on different tapes")
            tape = t.tape
    return tape


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def primitive(op, inputs, value, vjp):
    """Record ``value`` as the output of ``op`` applied to ``inputs``.

    ``vjp(g)`` must return one cotangent (or None) per input. Untracked
    inputs get their parent slot set to None so their cotangents are never
    computed into the tape.
    """
    value = np.asarray(value, dtype=np.float64)
    _check_finite(op, value)
    ts = [_as_tensor(x) for x in inputs]
    tape = _common_tape(op, *ts)
    if tape is None:
        return Tensor(value)
    parents = [t.index if t.tape is tape else None for t in ts]
    return tape._record(op, value, parents, vjp)


def _binary_shapes(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("add", a, b)
    sa, sb = a.shape, b.shape
    return primitive("add", (a, b), a.value + b.value,
                     lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("sub", a, b)
    sa, sb = a.shape, b.shape
    return primitive("sub", (a, b), a.value - b.value,
                     lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("mul", a, b)
    av, bv = a.value, b.value
    return primitive("mul", (a, b), av * bv,
                     lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("div", a, b)
    av, bv = a.value, b.value
    out = av / bv
    return primitive("div", (a, b), out,
                     lambda g: (_unbroadcast(g / bv, av.shape),
                                _unbroadcast(-g * out / bv, bv.shape)))


def scale(a, c):
    a = _as_tensor(a)
    c = float(c)
    return primitive("scale", (a,), c * a.value, lambda g: (c * g,))


def exp(a):
    a = _as_tensor(a)
    out = np.exp(a.value)
    return primitive("exp", (a,), out, lambda g: (g * out,))


def log(a):
    a = _as_tensor(a)
    if np.any(a.value <= 0):
        raise NumericalError("log: non-positive argument")
    av = a.value
    return primitive("log", (a,), np.log(av), lambda g: (g / av,))


def sqrt(a):
    """sqrt(max(a, 1e-12)) with zero subgradient below the guard."""
    a = _as_tensor(a)
    av = a.value
    live = av > SQRT_GUARD
    out = np.sqrt(np.maximum(av, SQRT_GUARD))
    return primitive("sqrt", (a,), out, lambda g: (np.where(live, 0.5 * g / out, 0.0),))


def tanh(a):
    a = _as_tensor(a)
    out = np.tanh(a.value)
    return primitive("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a):
    """Exact GELU, x * Phi(x)."""
    a = _as_tensor(a)
    x = a.value
    cdf = 0.5 * (1.0 + special.erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return primitive("gelu", (a,), x * cdf, lambda g: (g * (cdf + x * pdf),))


def identity(a):
    return _as_tensor(a)


ACTIVATIONS = {"gelu": gelu, "tanh": tanh, "identity": identity}


# ---------------------------------------------------------------------------
# reductions and linear algebra


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    a = _as_tensor(a)
    shape = a.shape
    out = np.sum(a.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return primitive("sum", (a,), out, vjp)


def mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    n = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.value, b.value
    return primitive("matmul", (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def einsum(spec, a, b):
    """Two-operand einsum without repeated or operand-private summed indices."""
    a, b = _as_tensor(a), _as_tensor(b)
    lhs, out = spec.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    for s, t in ((sa, a), (sb, b)):
        if len(set(s)) != len(s) or len(s) != t.ndim:
            raise ShapeError(f"einsum[{spec}]", a.shape, b.shape)
        if any(c not in out and c not in (sb if s is sa else sa) for c in s):
            raise ValidationError(f"einsum[{spec}]: operand-private summed index")
    try:
        value = np.einsum(spec, a.value, b.value, optimize=True)
    except ValueError:
        raise ShapeError(f"einsum[{spec}]", a.shape, b.shape) from None
    av, bv = a.value, b.value
    return primitive(f"einsum[{spec}]", (a, b), value, lambda g: (
        np.einsum(f"{out},{sb}->{sa}", g, bv, optimize=True),
        np.einsum(f"{out},{sa}->{sb}", g, av, optimize=True),
    ))


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.shape
    try:
        out = a.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", old, shape) from None
    return primitive("reshape", (a,), out, lambda g: (g.reshape(old),))


def transpose(a, axes):
    a = _as_tensor(a)
    inv = np.argsort(axes)
    return primitive("transpose", (a,), np.transpose(a.value, axes),
                     lambda g: (np.transpose(g, inv),))


def getitem(a, key):
    a = _as_tensor(a)
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, key, g)
        return (out,)

    return primitive("getitem", (a,), a.value[key], vjp)


def concat(tensors, axis):
    ts = [_as_tensor(t) for t in tensors]
    try:
        value = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in ts]) from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def vjp(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return primitive("concat", ts, value, vjp)


def pad(a, widths):
    """Zero-pad at the high end of each axis; ``widths`` has one int per axis."""
    a = _as_tensor(a)
    if len(widths) != a.ndim:
        raise ShapeError("pad", a.shape, detail=f"{len(widths)} pad widths")
    if not any(widths):
        return a
    crop = tuple(slice(0, n) for n in a.shape)
    return primitive("pad", (a,), np.pad(a.value, [(0, w) for w in widths]),
                     lambda g: (g[crop],))


def crop(a, shape):
    """Keep the leading ``shape`` block of ``a``; inverse of :func:`pad`."""
    a = _as_tensor(a)
    if tuple(shape) == a.shape:
        return a
    key = tuple(slice(0, n) for n in shape)
    widths = [(0, n - m) for n, m in zip(a.shape, shape)]
    return primitive("crop", (a,), a.value[key], lambda g: (np.pad(g, widths),))
