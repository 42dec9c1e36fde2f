"""Dense f64 tensors with a reverse-mode tape.

Operations record themselves on the active :class:`Tape` (entered with
``with Tape() as tape:``) when any input requires a gradient.  Outside a tape
the same functions just compute values, which is the inference path.
"""

import threading

import numpy as np

DEBUG = False

_state = threading.local()


class ShapeMismatch(ValueError):
    pass


class StaleTape(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def _active_tape():
    return getattr(_state, "tape", None)


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "parents", "backward_fn", "name")

    def __init__(self, value, requires_grad=False, name=None):
        v = np.asarray(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        elif v.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {v.shape}")
        self.value = v
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = ()
        self.backward_fn = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        if self.value.size != 1:
            raise ShapeMismatch(f"item() on shape {self.shape}")
        return float(self.value[0, 0])

    def numpy(self):
        return self.value

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value, name=None):
    return Tensor(value, requires_grad=True, name=name)


class Tape:
    """Records operations in execution order; :meth:`backward` runs once."""

    def __init__(self):
        self.nodes = []
        self.consumed = False

    def __enter__(self):
        self._prev = _active_tape()
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = self._prev
        return False

    def backward(self, loss):
        """Populate ``.grad`` on every parameter reachable from ``loss``.

        Returns the list of leaf parameters that received gradients.
        """
        if self.consumed:
            raise StaleTape("backward already ran on this tape; re-run the forward pass")
        if loss.value.size != 1:
            raise ShapeMismatch("backward needs a scalar loss")
        self.consumed = True
        leaves = {}
        for node in self.nodes:
            node.grad = None
            for p in node.parents:
                if p.backward_fn is None and p.requires_grad:
                    leaves[id(p)] = p
        for p in leaves.values():
            p.grad = np.zeros_like(p.value)
        loss.grad = np.ones((1, 1))
        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            grads = node.backward_fn(node.grad)
            for p, g in zip(node.parents, grads):
                if g is None or not p.requires_grad:
                    continue
                if DEBUG and not np.all(np.isfinite(g)):
                    raise NonFiniteError(f"non-finite gradient flowing into {p!r}")
                p.grad = g if p.grad is None else p.grad + g
        return list(leaves.values())


def _make(value, parents, backward_fn):
    if DEBUG and not np.all(np.isfinite(value)):
        raise NonFiniteError("non-finite value produced")
    out = Tensor(value)
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.backward_fn = backward_fn
        tape.nodes.append(out)
    return out


def _check_same(a, b, op):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: {a.shape} vs {b.shape}")


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[1] == shape[1]:
        return g.sum(axis=0, keepdims=True)
    if shape == (1, 1):
        return np.array([[g.sum()]])
    raise ShapeMismatch(f"cannot reduce gradient {g.shape} to {shape}")


def _broadcastable(a, b):
    sa, sb = a.shape, b.shape
    return sa == sb or (sb[0] == 1 and sb[1] == sa[1]) or (sa[0] == 1 and sa[1] == sb[1]) or (1, 1) in (sa, sb)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if not _broadcastable(a, b):
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    sa, sb = a.shape, b.shape
    return _make(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if not _broadcastable(a, b):
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")
    sa, sb = a.shape, b.shape
    return _make(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same(a, b, "mul")
    av, bv = a.value, b.value
    return _make(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a, c):
    c = float(c)
    return _make(a.value * c, (a,), lambda g: (g * c,))


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _make(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def affine(x, W, b):
    """``x @ W + b`` with ``b`` broadcast over rows."""
    if x.shape[1] != W.shape[0] or b.shape != (1, W.shape[1]):
        raise ShapeMismatch(f"affine: x{x.shape} W{W.shape} b{b.shape}")
    xv, Wv = x.value, W.value
    return _make(
        xv @ Wv + b.value,
        (x, W, b),
        lambda g: (g @ Wv.T, xv.T @ g, g.sum(axis=0, keepdims=True)),
    )


def leaky_relu(x, slope=0.01):
    xv = x.value
    d = np.where(xv > 0, 1.0, slope)
    return _make(xv * d, (x,), lambda g: (g * d,))


def concat(a, b):
    """Column-wise concatenation of two tensors with equal row counts."""
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"concat: {a.shape} vs {b.shape}")
    k = a.shape[1]
    return _make(np.hstack([a.value, b.value]), (a, b), lambda g: (g[:, :k], g[:, k:]))


def take_rows(x, idx):
    idx = np.asarray(idx, dtype=np.int64)
    n = x.shape[0]

    def back(g):
        out = np.zeros((n, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return _make(x.value[idx], (x,), back)


def repeat_rows(x, times):
    """Each row repeated ``times`` times consecutively."""
    k = x.shape[0]
    return _make(
        np.repeat(x.value, times, axis=0),
        (x,),
        lambda g: (g.reshape(k, times, -1).sum(axis=1),),
    )


def spmm(S, x):
    """Constant (scipy sparse or dense) matrix times tensor."""
    if S.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"spmm: {S.shape} @ {x.shape}")
    out = S @ x.value
    return _make(np.asarray(out), (x,), lambda g: (np.asarray(S.T @ g),))


def sum_all(x):
    shape = x.shape
    return _make(np.array([[x.value.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),))


def mean_all(x):
    n = x.value.size
    shape = x.shape
    return _make(np.array([[x.value.sum() / n]]), (x,), lambda g: (np.full(shape, g[0, 0] / n),))


def sum_sq(x):
    xv = x.value
    return _make(np.array([[np.sum(xv * xv)]]), (x,), lambda g: (2.0 * g[0, 0] * xv,))


def l2_sq(a, b):
    """Sum of squared differences ``||a - b||^2`` over all entries."""
    return sum_sq(sub(a, b))


def mse(a, b):
    """Mean over all entries of ``(a - b)^2``."""
    a, b = as_tensor(a), as_tensor(b)
    _check_same(a, b, "mse")
    d = a.value - b.value
    n = d.size

    def back(g):
        ga = (2.0 * g[0, 0] / n) * d
        return ga, -ga

    return _make(np.array([[np.sum(d * d) / n]]), (a, b), back)


def weighted_sum(terms):
    """``sum(w * t)`` over ``(w, t)`` pairs of scalar tensors."""
    out = None
    for w, t in terms:
        term = scale(t, w)
        out = term if out is None else add(out, term)
    return out
