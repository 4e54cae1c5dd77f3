"""Minimal reverse-mode tape over numpy arrays.

Covers exactly the operations the dense tanh columns and the physics
losses need (affine maps, tanh, elementwise arithmetic, abs/max, slicing,
reductions). Every value is a float64 ndarray and gradient accumulation
follows a fixed topological order, so results are deterministic.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Adjoint of numpy broadcasting: reduce g back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    __slots__ = ("v", "grad", "need", "_parents", "_bwd")

    def __init__(self, value, parents=(), bwd=None, need=None):
        if isinstance(value, np.ndarray):
            self.v = value if value.dtype == np.float64 else value.astype(np.float64)
        else:
            self.v = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._bwd = bwd
        if need is None:
            need = any(p.need for p in parents)
        self.need = need

    @property
    def shape(self):
        return self.v.shape

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def const(x) -> Var:
    return x if isinstance(x, Var) else Var(x, need=False)


def leaf(x) -> Var:
    """A trainable leaf; gradients are accumulated into .grad."""
    return Var(x, need=True)


def add(a, b) -> Var:
    a, b = const(a), const(b)
    out = Var(
        a.v + b.v,
        parents=(a, b),
        bwd=(lambda g: _unbroadcast(g, a.v.shape), lambda g: _unbroadcast(g, b.v.shape)),
    )
    return out


def mul(a, b) -> Var:
    a, b = const(a), const(b)
    return Var(
        a.v * b.v,
        parents=(a, b),
        bwd=(
            lambda g: _unbroadcast(g * b.v, a.v.shape),
            lambda g: _unbroadcast(g * a.v, b.v.shape),
        ),
    )


def div(a, b) -> Var:
    a, b = const(a), const(b)
    return Var(
        a.v / b.v,
        parents=(a, b),
        bwd=(
            lambda g: _unbroadcast(g / b.v, a.v.shape),
            lambda g: _unbroadcast(-g * a.v / (b.v * b.v), b.v.shape),
        ),
    )


def matmul(a, b) -> Var:
    a, b = const(a), const(b)
    return Var(
        a.v @ b.v,
        parents=(a, b),
        bwd=(lambda g: g @ b.v.T, lambda g: a.v.T @ g),
    )


def tanh(a) -> Var:
    a = const(a)
    y = np.tanh(a.v)

    def bwd(g):
        out = y * y
        np.subtract(1.0, out, out=out)
        out *= g
        return out

    return Var(y, parents=(a,), bwd=(bwd,))


def sqrt(a) -> Var:
    a = const(a)
    y = np.sqrt(a.v)
    return Var(y, parents=(a,), bwd=(lambda g: 0.5 * g / y,))


def absolute(a) -> Var:
    a = const(a)
    return Var(np.abs(a.v), parents=(a,), bwd=(lambda g: g * np.sign(a.v),))


def maximum(a, b) -> Var:
    a, b = const(a), const(b)
    mask = a.v >= b.v
    return Var(
        np.maximum(a.v, b.v),
        parents=(a, b),
        bwd=(
            lambda g: _unbroadcast(g * mask, a.v.shape),
            lambda g: _unbroadcast(g * (~mask), b.v.shape),
        ),
    )


def vsum(a, axis=None, keepdims=False) -> Var:
    a = const(a)

    def bwd(g):
        if axis is None:
            return np.broadcast_to(g, a.v.shape)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.v.shape)

    return Var(a.v.sum(axis=axis, keepdims=keepdims), parents=(a,), bwd=(bwd,))


def vmean(a, axis=None, keepdims=False) -> Var:
    a = const(a)
    n = a.v.size if axis is None else a.v.shape[axis]
    return mul(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape) -> Var:
    a = const(a)
    return Var(a.v.reshape(shape), parents=(a,), bwd=(lambda g: g.reshape(a.v.shape),))


def take(a, key) -> Var:
    a = const(a)

    def bwd(g):
        z = np.zeros_like(a.v)
        if isinstance(key, np.ndarray) or (
            isinstance(key, tuple) and any(isinstance(k, np.ndarray) for k in key)
        ):
            np.add.at(z, key, g)
        else:
            z[key] += g
        return z

    return Var(a.v[key], parents=(a,), bwd=(bwd,))


def concat(items, axis=0) -> Var:
    items = [const(x) for x in items]
    sizes = [x.v.shape[axis] for x in items]
    offs = np.cumsum([0] + sizes)

    def make_bwd(i):
        sl = [slice(None)] * items[i].v.ndim
        sl[axis] = slice(offs[i], offs[i + 1])
        sl = tuple(sl)
        return lambda g: g[sl]

    return Var(
        np.concatenate([x.v for x in items], axis=axis),
        parents=tuple(items),
        bwd=tuple(make_bwd(i) for i in range(len(items))),
    )


def where_const(mask, a, b) -> Var:
    """Select with a non-differentiable mask (mask carries no gradient)."""
    a, b = const(a), const(b)
    m = np.asarray(mask)
    return Var(
        np.where(m, a.v, b.v),
        parents=(a, b),
        bwd=(
            lambda g: _unbroadcast(g * m, a.v.shape),
            lambda g: _unbroadcast(g * (~m), b.v.shape),
        ),
    )


def backward(root: Var) -> None:
    """Accumulate gradients of a scalar root into every needed leaf."""
    if root.v.size != 1:
        raise ValueError("backward expects a scalar root")
    if not root.need:
        return
    topo = []
    visited = {id(root)}
    stack = [(root, iter(root._parents))]
    while stack:
        node, it = stack[-1]
        pushed = False
        for p in it:
            if p.need and id(p) not in visited:
                visited.add(id(p))
                stack.append((p, iter(p._parents)))
                pushed = True
                break
        if not pushed:
            topo.append(node)
            stack.pop()
    root.grad = np.ones_like(root.v)
    for node in reversed(topo):
        if node._bwd is None:
            continue
        g = node.grad
        for parent, fn in zip(node._parents, node._bwd):
            if not parent.need:
                continue
            contrib = fn(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib
