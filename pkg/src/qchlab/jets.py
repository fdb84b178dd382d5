"""Truncated second-order Taylor jets in the four chart coordinates.

A :class:`Jet` carries an array of values together with its exact first and
second partial derivatives with respect to ``(x, y, z, t)``.  Derivative axes
are *leading*: for a value array of shape ``S`` the gradient has shape
``(4,) + S`` and the Hessian ``(4, 4) + S``.  This keeps elementwise
arithmetic a plain numpy broadcast and lets ``np.einsum`` with an ellipsis
carry the derivative axes through contractions.

Jets are truncated: ``order`` is 0, 1 or 2 and every operation returns the
minimum order of its jet operands.
"""

from __future__ import annotations

import numpy as np

NDIM = 4


class Jet:
    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 1000

    def __init__(self, val, grad=None, hess=None):
        self.val = np.asarray(val, dtype=float)
        self.grad = grad
        self.hess = hess if grad is not None else None

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, val, order=2):
        val = np.asarray(val, dtype=float)
        grad = np.zeros((NDIM,) + val.shape) if order >= 1 else None
        hess = np.zeros((NDIM, NDIM) + val.shape) if order >= 2 else None
        return cls(val, grad, hess)

    @classmethod
    def coordinate(cls, points, axis, order=2):
        """The coordinate function ``points[:, axis]`` as a jet."""
        points = np.asarray(points, dtype=float)
        val = points[:, axis].copy()
        grad = hess = None
        if order >= 1:
            grad = np.zeros((NDIM,) + val.shape)
            grad[axis] = 1.0
        if order >= 2:
            hess = np.zeros((NDIM, NDIM) + val.shape)
        return cls(val, grad, hess)

    @property
    def order(self):
        if self.grad is None:
            return 0
        return 1 if self.hess is None else 2

    @property
    def shape(self):
        return self.val.shape

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.val, self.grad if order >= 1 else None, None)

    def d(self):
        """Coordinate gradient as a jet of one lower order.

        The new trailing axis indexes the differentiation direction.
        """
        if self.grad is None:
            raise ValueError("cannot differentiate an order-0 jet")
        val = np.moveaxis(self.grad, 0, -1)
        grad = None if self.hess is None else np.moveaxis(self.hess, 1, -1)
        return Jet(val, grad)

    # -- indexing / shape ---------------------------------------------
    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        grad = None if self.grad is None else self.grad[(slice(None),) + idx]
        hess = None if self.hess is None else self.hess[(slice(None), slice(None)) + idx]
        return Jet(self.val[idx], grad, hess)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        grad = None if self.grad is None else self.grad.reshape((NDIM,) + shape)
        hess = None if self.hess is None else self.hess.reshape((NDIM, NDIM) + shape)
        return Jet(self.val.reshape(shape), grad, hess)

    def __repr__(self):
        return f"Jet(order={self.order}, shape={self.shape})"

    # -- arithmetic ---------------------------------------------------
    def __neg__(self):
        return Jet(-self.val, _neg(self.grad), _neg(self.hess))

    def __pos__(self):
        return self

    def __add__(self, other):
        other = _lift(other, self)
        order = min(self.order, other.order)
        a, b = self.truncate(order), other.truncate(order)
        return Jet(a.val + b.val, _add(a.grad, b.grad), _add(a.hess, b.hess))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_lift(other, self))

    def __rsub__(self, other):
        return _lift(other, self) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(
                self.val * other,
                None if self.grad is None else self.grad * other,
                None if self.hess is None else self.hess * other,
            )
        order = min(self.order, other.order)
        a, b = self.truncate(order), other.truncate(order)
        val = a.val * b.val
        grad = hess = None
        if order >= 1:
            grad = a.grad * b.val + a.val * b.grad
        if order >= 2:
            hess = (
                a.hess * b.val
                + a.val * b.hess
                + a.grad[:, None] * b.grad[None, :]
                + b.grad[:, None] * a.grad[None, :]
            )
        return Jet(val, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        if np.any(v == 0.0):
            raise ZeroDivisionError("jet reciprocal of a zero value")
        return self.apply(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        p = float(p)
        v = self.val
        if p == int(p) and p >= 0:
            n = int(p)
            return self.apply(
                v**n,
                n * v ** max(n - 1, 0) if n >= 1 else np.zeros_like(v),
                n * (n - 1) * v ** max(n - 2, 0) if n >= 2 else np.zeros_like(v),
            )
        return self.apply(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # -- chain rule ---------------------------------------------------
    def apply(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives
        evaluated at ``self.val``."""
        grad = hess = None
        if self.order >= 1:
            grad = f1 * self.grad
        if self.order >= 2:
            hess = f2 * self.grad[:, None] * self.grad[None, :] + f1 * self.hess
        return Jet(f0, grad, hess)


def _neg(a):
    return None if a is None else -a


def _add(a, b):
    if a is None or b is None:
        return None
    return a + b


def _lift(other, like):
    if isinstance(other, Jet):
        return other
    return Jet.constant(np.broadcast_to(np.asarray(other, dtype=float), like.shape), like.order)


def as_jet(a, order=2):
    return a if isinstance(a, Jet) else Jet.constant(a, order)


# -- elementary functions ---------------------------------------------

def exp(a):
    e = np.exp(a.val)
    return a.apply(e, e, e)


def log(a):
    v = a.val
    return a.apply(np.log(v), 1.0 / v, -1.0 / v**2)


def sin(a):
    s, c = np.sin(a.val), np.cos(a.val)
    return a.apply(s, c, -s)


def cos(a):
    s, c = np.sin(a.val), np.cos(a.val)
    return a.apply(c, -s, -c)


def tan(a):
    t = np.tan(a.val)
    sec2 = 1.0 + t * t
    return a.apply(t, sec2, 2.0 * t * sec2)


def sinh(a):
    s, c = np.sinh(a.val), np.cosh(a.val)
    return a.apply(s, c, s)


def cosh(a):
    s, c = np.sinh(a.val), np.cosh(a.val)
    return a.apply(c, s, c)


def tanh(a):
    t = np.tanh(a.val)
    sech2 = 1.0 - t * t
    return a.apply(t, sech2, -2.0 * t * sech2)


def sqrt(a):
    r = np.sqrt(a.val)
    return a.apply(r, 0.5 / r, -0.25 / r**3)


# -- multilinear algebra ----------------------------------------------

def einsum(subscripts, *operands):
    """Product-rule ``np.einsum`` over any mix of jets and plain arrays.

    ``subscripts`` is written for the value arrays only (no ellipsis); the
    derivative axes are prepended automatically.
    """
    ins, out = subscripts.split("->")
    ins = ins.split(",")
    jets = [i for i, op in enumerate(operands) if isinstance(op, Jet)]
    vals = [op.val if isinstance(op, Jet) else np.asarray(op, dtype=float) for op in operands]
    val = np.einsum(subscripts, *vals, optimize=True)
    if not jets:
        return val
    order = min(operands[i].order for i in jets)
    spec = ",".join("..." + s for s in ins) + "->..." + out

    grad = hess = None
    if order >= 1:
        grad = 0.0
        for k in jets:
            args = list(vals)
            args[k] = operands[k].grad
            grad = grad + np.einsum(spec, *args, optimize=True)
    if order >= 2:
        hess = 0.0
        for k in jets:
            args = list(vals)
            args[k] = operands[k].hess
            hess = hess + np.einsum(spec, *args, optimize=True)
        for k in jets:
            for m in jets:
                if k == m:
                    continue
                args = list(vals)
                args[k] = operands[k].grad[:, None]
                args[m] = operands[m].grad[None, :]
                hess = hess + np.einsum(spec, *args, optimize=True)
    return Jet(val, grad, hess)


def inv(a):
    """Inverse of a jet of square matrices over the last two axes."""
    ai = np.linalg.inv(a.val)
    grad = hess = None
    if a.order >= 1:
        # d(A^-1) = -A^-1 dA A^-1
        grad = -np.einsum("...ij,u...jk,...kl->u...il", ai, a.grad, ai, optimize=True)
    if a.order >= 2:
        t1 = np.einsum("...ij,u...jk,...kl,v...lm,...mn->uv...in", ai, a.grad, ai, a.grad, ai, optimize=True)
        t2 = np.einsum("...ij,uv...jk,...kl->uv...il", ai, a.hess, ai, optimize=True)
        hess = t1 + np.swapaxes(t1, 0, 1) - t2
    return Jet(ai, grad, hess)


def det(a):
    """Determinant of a jet of square matrices over the last two axes."""
    dv = np.linalg.det(a.val)
    grad = hess = None
    if a.order >= 1:
        ai = np.linalg.inv(a.val)
        tr1 = np.einsum("...ij,u...ji->u...", ai, a.grad, optimize=True)
        grad = dv * tr1
        if a.order >= 2:
            tr2 = np.einsum("...ij,u...jk,...kl,v...li->uv...", ai, a.grad, ai, a.grad, optimize=True)
            trh = np.einsum("...ij,uv...ji->uv...", ai, a.hess, optimize=True)
            hess = dv * (tr1[:, None] * tr1[None, :] - tr2 + trh)
    return Jet(dv, grad, hess)


def stack(jets, axis=-1):
    """Stack jets (or arrays) along a new value axis."""
    order = min((j.order for j in jets if isinstance(j, Jet)), default=0)
    jets = [as_jet(j, order).truncate(order) for j in jets]
    nd = jets[0].val.ndim
    ax = axis if axis >= 0 else nd + 1 + axis
    val = np.stack([j.val for j in jets], axis=ax)
    grad = np.stack([j.grad for j in jets], axis=ax + 1) if order >= 1 else None
    hess = np.stack([j.hess for j in jets], axis=ax + 2) if order >= 2 else None
    return Jet(val, grad, hess)


def value(a):
    return a.val if isinstance(a, Jet) else np.asarray(a, dtype=float)
