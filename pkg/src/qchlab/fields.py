"""Scalar fields on the chart ``(x, y, z, t)`` with exact derivatives to order 2.

Closed-form fields are immutable expression trees.  Evaluation returns a
:class:`~qchlab.jets.Jet`, so first and second partials come out of forward
mode arithmetic instead of finite differences.  :meth:`ScalarField.partial`
differentiates the tree itself, which is how quantities such as
``l2 = -(ln H)_y`` stay closed form and remain twice differentiable.

Fields backed by a grid (see :mod:`qchlab.solver`) use a tensor-product
quintic spline and report ``grid_backed = True`` so consumers can pick the
looser tolerance tier.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets
from .jets import Jet

COORDS = ("x", "y", "z", "t")


class FieldDomainError(ValueError):
    """A field was evaluated outside its domain (ln of a non-positive value, ...)."""


class ExpressionError(ValueError):
    """Malformed expression string or tree."""


@dataclass(frozen=True)
class Point4:
    x: float
    y: float
    z: float
    t: float

    def __post_init__(self):
        for name in COORDS:
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate {name}={v}")
            object.__setattr__(self, name, v)

    def __iter__(self):
        return iter((self.x, self.y, self.z, self.t))

    def __array__(self, dtype=None, copy=None):
        return np.array(tuple(self), dtype=dtype or float)


def as_points(points) -> np.ndarray:
    """Coerce a Point4, a sequence of them, or an ``(N, 4)`` array to ``(N, 4)``."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected points of shape (N, 4), got {arr.shape}")
    return arr


def _raise_domain(node, points, bad):
    idx = int(np.flatnonzero(bad)[0])
    p = tuple(float(v) for v in points[idx])
    raise FieldDomainError(f"{node} is outside its domain at point {p}")


class ScalarField:
    """Base class for scalar fields; subclasses implement ``_jet`` and ``partial``."""

    grid_backed = False

    def jet(self, points, order: int = 2) -> Jet:
        return self._jet(as_points(points), order)

    def __call__(self, points) -> np.ndarray:
        return self.jet(points, order=0).val

    def _jet(self, points, order):  # pragma: no cover - abstract
        raise NotImplementedError

    def partial(self, axis: int) -> "ScalarField":  # pragma: no cover - abstract
        raise NotImplementedError

    def partial_multi(self, index: Sequence[int]) -> "ScalarField":
        f = self
        for ax in index:
            f = f.partial(ax)
        return f

    @property
    def is_zero(self):
        return False

    # operator sugar builds trees
    def __add__(self, other):
        return add(self, as_field(other))

    def __radd__(self, other):
        return add(as_field(other), self)

    def __sub__(self, other):
        return sub(self, as_field(other))

    def __rsub__(self, other):
        return sub(as_field(other), self)

    def __mul__(self, other):
        return mul(self, as_field(other))

    def __rmul__(self, other):
        return mul(as_field(other), self)

    def __truediv__(self, other):
        return div(self, as_field(other))

    def __rtruediv__(self, other):
        return div(as_field(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, as_field(p))


class Const(ScalarField):
    def __init__(self, value: float):
        self.value = float(value)

    def _jet(self, points, order):
        return Jet.constant(np.full(len(points), self.value), order)

    def partial(self, axis):
        return ZERO

    @property
    def is_zero(self):
        return self.value == 0.0

    def __str__(self):
        return repr(self.value)


ZERO = Const(0.0)
ONE = Const(1.0)


class Coord(ScalarField):
    def __init__(self, axis: int):
        if axis not in range(4):
            raise ExpressionError(f"coordinate axis {axis} out of range")
        self.axis = axis

    def _jet(self, points, order):
        return Jet.coordinate(points, self.axis, order)

    def partial(self, axis):
        return ONE if axis == self.axis else ZERO

    def __str__(self):
        return COORDS[self.axis]


X, Y, Z, T = (Coord(i) for i in range(4))


class _Binary(ScalarField):
    symbol = "?"

    def __init__(self, a: ScalarField, b: ScalarField):
        if not isinstance(a, ScalarField) or not isinstance(b, ScalarField):
            raise ExpressionError("operands must be ScalarField instances")
        self.a, self.b = a, b

    @property
    def grid_backed(self):
        return self.a.grid_backed or self.b.grid_backed

    def __str__(self):
        return f"({self.a} {self.symbol} {self.b})"


class Add(_Binary):
    symbol = "+"

    def _jet(self, points, order):
        return self.a._jet(points, order) + self.b._jet(points, order)

    def partial(self, axis):
        return add(self.a.partial(axis), self.b.partial(axis))


class Sub(_Binary):
    symbol = "-"

    def _jet(self, points, order):
        return self.a._jet(points, order) - self.b._jet(points, order)

    def partial(self, axis):
        return sub(self.a.partial(axis), self.b.partial(axis))


class Mul(_Binary):
    symbol = "*"

    def _jet(self, points, order):
        return self.a._jet(points, order) * self.b._jet(points, order)

    def partial(self, axis):
        return add(mul(self.a.partial(axis), self.b), mul(self.a, self.b.partial(axis)))


class Div(_Binary):
    symbol = "/"

    def _jet(self, points, order):
        den = self.b._jet(points, order)
        bad = den.val == 0.0
        if np.any(bad):
            _raise_domain(self, points, bad)
        return self.a._jet(points, order) / den

    def partial(self, axis):
        da, db = self.a.partial(axis), self.b.partial(axis)
        return sub(div(da, self.b), div(mul(self.a, db), mul(self.b, self.b)))


class Pow(_Binary):
    """``a ** b``; a constant exponent keeps negative bases legal for integer powers."""

    symbol = "^"

    def _jet(self, points, order):
        base = self.a._jet(points, order)
        if isinstance(self.b, Const):
            p = self.b.value
            if p != int(p):
                bad = base.val < 0 if p > 0 else base.val <= 0
                if np.any(bad):
                    _raise_domain(self, points, bad)
            elif p < 0 and np.any(base.val == 0):
                _raise_domain(self, points, base.val == 0)
            return base**p
        bad = base.val <= 0
        if np.any(bad):
            _raise_domain(self, points, bad)
        return jets.exp(self.b._jet(points, order) * jets.log(base))

    def partial(self, axis):
        if isinstance(self.b, Const):
            p = self.b.value
            if p == 0.0:
                return ZERO
            return mul(mul(Const(p), power(self.a, Const(p - 1.0))), self.a.partial(axis))
        # d(a^b) = a^b (b' ln a + b a'/a)
        return mul(
            self,
            add(
                mul(self.b.partial(axis), Func("ln", self.a)),
                div(mul(self.b, self.a.partial(axis)), self.a),
            ),
        )


class Neg(ScalarField):
    def __init__(self, a: ScalarField):
        self.a = a

    @property
    def grid_backed(self):
        return self.a.grid_backed

    def _jet(self, points, order):
        return -self.a._jet(points, order)

    def partial(self, axis):
        return neg(self.a.partial(axis))

    def __str__(self):
        return f"(-{self.a})"


def _check_positive(node, points, v):
    bad = ~(v > 0)
    if np.any(bad):
        _raise_domain(node, points, bad)


def _check_nonnegative(node, points, v):
    bad = ~(v >= 0)
    if np.any(bad):
        _raise_domain(node, points, bad)


def _check_tan(node, points, v):
    bad = np.abs(np.cos(v)) < 1e-300
    if np.any(bad):
        _raise_domain(node, points, bad)


_FUNCS = {
    "exp": (jets.exp, None),
    "ln": (jets.log, _check_positive),
    "sin": (jets.sin, None),
    "cos": (jets.cos, None),
    "tan": (jets.tan, _check_tan),
    "sinh": (jets.sinh, None),
    "cosh": (jets.cosh, None),
    "tanh": (jets.tanh, None),
    "sqrt": (jets.sqrt, _check_nonnegative),
}


class Func(ScalarField):
    """An elementary function applied to a field."""

    def __init__(self, name: str, a: ScalarField):
        if name not in _FUNCS:
            raise ExpressionError(f"unknown function {name!r}")
        if not isinstance(a, ScalarField):
            raise ExpressionError("function argument must be a ScalarField")
        self.name, self.a = name, a

    @property
    def grid_backed(self):
        return self.a.grid_backed

    def _jet(self, points, order):
        inner = self.a._jet(points, order)
        fn, check = _FUNCS[self.name]
        if check is not None:
            check(self, points, inner.val)
        if self.name == "sqrt" and order > 0:
            _check_positive(self, points, inner.val)
        return fn(inner)

    def _outer_derivative(self):
        a, n = self.a, self.name
        if n == "exp":
            return self
        if n == "ln":
            return div(ONE, a)
        if n == "sin":
            return Func("cos", a)
        if n == "cos":
            return neg(Func("sin", a))
        if n == "tan":
            return add(ONE, mul(self, self))
        if n == "sinh":
            return Func("cosh", a)
        if n == "cosh":
            return Func("sinh", a)
        if n == "tanh":
            return sub(ONE, mul(self, self))
        if n == "sqrt":
            return div(Const(0.5), self)
        raise ExpressionError(n)  # pragma: no cover

    def partial(self, axis):
        return mul(self._outer_derivative(), self.a.partial(axis))

    def __str__(self):
        return f"{self.name}({self.a})"


# -- tree constructors with light constant folding ------------------------

def as_field(v) -> ScalarField:
    if isinstance(v, ScalarField):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Const(float(v))
    if isinstance(v, str):
        return parse(v)
    raise ExpressionError(f"cannot interpret {v!r} as a scalar field")


def add(a, b):
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if b.is_zero:
        return a
    if a.is_zero:
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a, b):
    if a.is_zero or b.is_zero:
        return ZERO
    if isinstance(a, Const) and a.value == 1.0:
        return b
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if isinstance(b, Const) and b.value == 0.0:
        raise ExpressionError("division by the constant zero")
    if a.is_zero:
        return ZERO
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    return Div(a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def power(a, b):
    if isinstance(b, Const):
        if b.value == 0.0:
            return ONE
        if b.value == 1.0:
            return a
    return Pow(a, b)


def exp(a):
    return Func("exp", as_field(a))


def ln(a):
    return Func("ln", as_field(a))


def sin(a):
    return Func("sin", as_field(a))


def cos(a):
    return Func("cos", as_field(a))


def tan(a):
    return Func("tan", as_field(a))


def sinh(a):
    return Func("sinh", as_field(a))


def cosh(a):
    return Func("cosh", as_field(a))


def tanh(a):
    return Func("tanh", as_field(a))


def sqrt(a):
    return Func("sqrt", as_field(a))


# -- string grammar ----------------------------------------------------

_NAMES = {"x": X, "y": Y, "z": Z, "t": T, "pi": Const(math.pi)}
_ALIASES = {"log": "ln"}


def parse(text: str) -> ScalarField:
    """Parse an expression over x, y, z, t, numbers, ``+ - * / ^``, pi and
    exp, ln, sin, cos, tan, sinh, cosh, tanh, sqrt.

    >>> parse("(x^2 + y^2)/2").jet([[1, 2, 0, 0]]).val
    array([2.5])
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _convert(tree.body, text)


def _convert(node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return Const(node.value)
    if isinstance(node, ast.Name):
        if node.id in _NAMES:
            return _NAMES[node.id]
        raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp):
        inner = _convert(node.operand, text)
        if isinstance(node.op, ast.USub):
            return neg(inner)
        if isinstance(node.op, ast.UAdd):
            return inner
    if isinstance(node, ast.BinOp):
        a, b = _convert(node.left, text), _convert(node.right, text)
        ops = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div, ast.Pow: power}
        for op_type, fn in ops.items():
            if isinstance(node.op, op_type):
                return fn(a, b)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = _ALIASES.get(node.func.id, node.func.id)
        if name in _FUNCS and len(node.args) == 1:
            return Func(name, _convert(node.args[0], text))
        raise ExpressionError(f"unknown function call {node.func.id!r} in {text!r}")
    raise ExpressionError(f"unsupported syntax in {text!r}: {ast.dump(node)}")


# -- grid-backed fields -------------------------------------------------

class GridField(ScalarField):
    """Tensor-product quintic spline through node values on an (x, y) rectangle.

    The field is constant in z and t.  ``dx``/``dy`` select a derivative of
    the spline, which is how :meth:`partial` stays closed under
    differentiation; the spline supports total x- or y-order up to 4 per axis,
    so fields built this way may be differentiated once before evaluation at
    order 2 exhausts that budget.
    """

    grid_backed = True
    MAX_AXIS_ORDER = 4

    def __init__(self, spline, bounds, dx: int = 0, dy: int = 0, name: str = "grid"):
        self.spline = spline
        self.bounds = tuple(float(b) for b in bounds)
        self.dx, self.dy = dx, dy
        self.name = name

    @classmethod
    def from_nodes(cls, xs, ys, values, name="grid"):
        from scipy.interpolate import RectBivariateSpline

        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        values = np.asarray(values, float)
        k = min(5, len(xs) - 1, len(ys) - 1)
        spline = RectBivariateSpline(xs, ys, values, kx=k, ky=k, s=0)
        return cls(spline, (xs[0], xs[-1], ys[0], ys[-1]), name=name)

    def _ev(self, x, y, dx, dy):
        if dx > self.MAX_AXIS_ORDER or dy > self.MAX_AXIS_ORDER:
            raise FieldDomainError(f"{self}: derivative order ({dx}, {dy}) exceeds spline degree")
        return self.spline.ev(x, y, dx=dx, dy=dy)

    def _jet(self, points, order):
        x, y = points[:, 0], points[:, 1]
        x0, x1, y0, y1 = self.bounds
        tol = 1e-12 * max(1.0, abs(x1 - x0), abs(y1 - y0))
        bad = (x < x0 - tol) | (x > x1 + tol) | (y < y0 - tol) | (y > y1 + tol)
        if np.any(bad):
            _raise_domain(self, points, bad)
        dx, dy = self.dx, self.dy
        val = self._ev(x, y, dx, dy)
        n = len(points)
        grad = hess = None
        if order >= 1:
            grad = np.zeros((4, n))
            grad[0] = self._ev(x, y, dx + 1, dy)
            grad[1] = self._ev(x, y, dx, dy + 1)
        if order >= 2:
            hess = np.zeros((4, 4, n))
            hess[0, 0] = self._ev(x, y, dx + 2, dy)
            hess[0, 1] = hess[1, 0] = self._ev(x, y, dx + 1, dy + 1)
            hess[1, 1] = self._ev(x, y, dx, dy + 2)
        return Jet(val, grad, hess)

    def partial(self, axis):
        if axis == 0:
            return GridField(self.spline, self.bounds, self.dx + 1, self.dy, self.name)
        if axis == 1:
            return GridField(self.spline, self.bounds, self.dx, self.dy + 1, self.name)
        return ZERO

    def __str__(self):
        suffix = "_" + "x" * self.dx + "y" * self.dy if (self.dx or self.dy) else ""
        return f"{self.name}{suffix}"


# -- point evaluation ----------------------------------------------------

_AXIS_LETTERS = {c: i for i, c in enumerate(COORDS)}


def _multi_index(d) -> tuple[int, ...]:
    if d is None:
        return ()
    if isinstance(d, str):
        try:
            return tuple(_AXIS_LETTERS[c] for c in d)
        except KeyError:
            raise ValueError(f"bad multi-index {d!r}") from None
    return tuple(int(i) for i in d)


def evaluate(field: ScalarField, point, d=()) -> float | np.ndarray:
    """Value or partial derivative of ``field`` at ``point``.

    ``d`` is a multi-index of total order at most 2, given either as axis
    numbers ``(0, 0)`` or as letters ``"xx"``.  A single point returns a float,
    an ``(N, 4)`` array returns an array.
    """
    idx = _multi_index(d)
    if len(idx) > 2:
        raise ValueError("derivative order above 2 is not supported")
    pts = as_points(point)
    jet = field.jet(pts, order=len(idx))
    if len(idx) == 0:
        out = jet.val
    elif len(idx) == 1:
        out = jet.grad[idx[0]]
    else:
        out = jet.hess[idx[0], idx[1]]
    single = np.asarray(point, dtype=float).ndim == 1
    return float(out[0]) if single else out
