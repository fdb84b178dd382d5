"""Differential forms on the 4-dimensional chart.

A :class:`KForm` stores one :class:`~qchlab.fields.ScalarField` per strictly
increasing coordinate index tuple, so ``wedge`` and ``exterior_d`` stay
closed form.  Metric-dependent operators (Hodge star, the self-dual split,
the codifferential) act on *evaluated components*: full antisymmetric arrays
of shape ``(N, 4, ..., 4)``, either plain arrays or jets.

Component convention: ``dx ^ dy`` has ``A[0, 1] = 1`` and ``A[1, 0] = -1``,
i.e. ``(dx ^ dy)(d_x, d_y) = 1``.  The inner product on k-forms is
``<A, B> = A_I B^I / k!`` so an orthonormal coframe's ``th_i ^ th_j`` (i<j)
are orthonormal.  The codifferential is ``delta = -*d*`` in every degree.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import jets
from .fields import ScalarField, as_field, as_points, ZERO, add, mul
from .jets import Jet

DIM = 4


class FormError(ValueError):
    pass


def perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def levi_civita(n: int = DIM) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for p in itertools.permutations(range(n)):
        eps[p] = perm_sign(p)
    return eps


class KForm:
    """A k-form with closed-form coefficients in the coordinate basis."""

    def __init__(self, degree: int, coeffs: dict | None = None):
        if degree not in range(DIM + 1):
            raise FormError(f"degree {degree} outside 0..{DIM}")
        self.degree = degree
        self.coeffs: dict[tuple[int, ...], ScalarField] = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise FormError(f"index {idx} does not match degree {degree}")
            s = perm_sign(idx)
            if s == 0:
                continue
            key = tuple(sorted(idx))
            c = as_field(c)
            if s < 0:
                c = -c
            prev = self.coeffs.get(key)
            c = c if prev is None else add(prev, c)
            if not c.is_zero:
                self.coeffs[key] = c

    @classmethod
    def one_form(cls, coeffs) -> "KForm":
        """1-form from four coefficients on dx, dy, dz, dt."""
        return cls(1, {(i,): c for i, c in enumerate(coeffs)})

    @classmethod
    def basis(cls, *idx) -> "KForm":
        return cls(len(idx), {tuple(idx): 1.0})

    @property
    def grid_backed(self):
        return any(c.grid_backed for c in self.coeffs.values())

    def coefficient(self, idx) -> ScalarField:
        """Coefficient on an arbitrary index tuple (sign of the permutation applied)."""
        s = perm_sign(idx)
        if s == 0:
            return ZERO
        c = self.coeffs.get(tuple(sorted(idx)), ZERO)
        return c if s > 0 else -c

    def __add__(self, other):
        if other.degree != self.degree:
            raise FormError("cannot add forms of different degree")
        merged = dict(self.coeffs)
        for k, c in other.coeffs.items():
            merged[k] = add(merged[k], c) if k in merged else c
        return KForm(self.degree, merged)

    def __neg__(self):
        return KForm(self.degree, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "KForm":
        f = as_field(f)
        return KForm(self.degree, {k: mul(f, c) for k, c in self.coeffs.items()})

    def __rmul__(self, f):
        return self.scale(f)

    def __xor__(self, other):
        return wedge(self, other)

    def components(self, points, order: int = 2) -> Jet:
        """Full antisymmetric component array ``(N, 4, ..., 4)`` as a jet."""
        pts = as_points(points)
        n = len(pts)
        k = self.degree
        val = np.zeros((n,) + (DIM,) * k)
        out = Jet.constant(val, order)
        for key, c in self.coeffs.items():
            cj = c.jet(pts, order)
            for p in itertools.permutations(range(k)):
                idx = tuple(key[i] for i in p)
                s = perm_sign(p)
                sl = (slice(None),) + idx
                out.val[sl] += s * cj.val
                if order >= 1:
                    out.grad[(slice(None),) + sl] += s * cj.grad
                if order >= 2:
                    out.hess[(slice(None), slice(None)) + sl] += s * cj.hess
        return out

    def __call__(self, points) -> np.ndarray:
        return self.components(points, order=0).val

    def __repr__(self):
        terms = ", ".join(f"{k}: {c}" for k, c in sorted(self.coeffs.items()))
        return f"KForm({self.degree}, {{{terms}}})"


def wedge(a: KForm, b: KForm) -> KForm:
    if a.degree + b.degree > DIM:
        raise FormError(f"wedge of degrees {a.degree} and {b.degree} exceeds {DIM}")
    out: dict = {}
    for ka, ca in a.coeffs.items():
        for kb, cb in b.coeffs.items():
            idx = ka + kb
            s = perm_sign(idx)
            if s == 0:
                continue
            term = mul(ca, cb)
            key = tuple(sorted(idx))
            term = term if s > 0 else -term
            out[key] = add(out[key], term) if key in out else term
    return KForm(a.degree + b.degree, out)


def exterior_d(a: KForm) -> KForm:
    if a.degree >= DIM:
        raise FormError("exterior derivative of a top-degree form")
    out: dict = {}
    for key, c in a.coeffs.items():
        for mu in range(DIM):
            if mu in key:
                continue
            dc = c.partial(mu)
            if dc.is_zero:
                continue
            idx = (mu,) + key
            s = perm_sign(idx)
            skey = tuple(sorted(idx))
            term = dc if s > 0 else -dc
            out[skey] = add(out[skey], term) if skey in out else term
    return KForm(a.degree + 1, out)


# -- operations on evaluated components ---------------------------------

def _subs(k):
    return "abcdefgh"[:k]


def antisymmetrize(arr: np.ndarray, first_axis: int = 1) -> np.ndarray:
    """Signed average over permutations of all axes from ``first_axis`` on."""
    k = arr.ndim - first_axis
    head = tuple(range(first_axis))
    out = np.zeros_like(arr)
    for p in itertools.permutations(range(k)):
        out = out + perm_sign(p) * np.transpose(arr, head + tuple(first_axis + i for i in p))
    return out / math.factorial(k)


def d_components(a: Jet) -> np.ndarray:
    """Exterior derivative of jet-valued components, evaluated numerically."""
    if a.order < 1:
        raise FormError("exterior derivative needs first derivatives of the components")
    k = a.val.ndim - 1
    # grad has shape (4, N, 4^k); bring the derivative axis next to N
    t = np.moveaxis(a.grad, 0, 1)
    return (k + 1) * antisymmetrize(t, 1)


def raise_indices(a, ginv):
    """Raise every form index with the inverse metric (jets or arrays)."""
    k = jets.value(a).ndim - 1
    for i in range(k):
        letters = list(_subs(k))
        src = "n" + "".join(letters)
        letters[i] = "z"
        dst = "n" + "".join(letters)
        a = jets.einsum(f"n{_subs(k)[i]}z,{src}->{dst}", ginv, a)
    return a


def hodge_star(a, metric, orientation: int = 1):
    """Hodge star of k-form components relative to ``metric`` ``(N, 4, 4)``.

    ``orientation`` is +1 when ``dx^dy^dz^dt`` is positively oriented.
    Works on jets (product rule carried through) or plain arrays.
    """
    if orientation not in (1, -1):
        raise FormError("orientation must be +1 or -1")
    gval = jets.value(metric)
    detg = np.linalg.det(gval)
    if np.any(~(detg > 0)) or np.any(np.linalg.eigvalsh(gval)[..., 0] <= 0):
        raise FormError("metric is not positive definite")
    use_jets = isinstance(a, Jet) or isinstance(metric, Jet)
    if use_jets:
        metric = jets.as_jet(metric, a.order if isinstance(a, Jet) else metric.order)
        ginv = jets.inv(metric)
        vol = jets.sqrt(jets.det(metric))
    else:
        ginv = np.linalg.inv(gval)
        vol = np.sqrt(detg)
    k = jets.value(a).ndim - 1
    up = raise_indices(a, ginv)
    eps = levi_civita(DIM)
    i_sub = _subs(k)
    o_sub = "pqrs"[: DIM - k]
    spec = f"n{i_sub},{i_sub}{o_sub}->n{o_sub}"
    contracted = jets.einsum(spec, up, eps)
    shape = (-1,) + (1,) * (DIM - k)
    factor = orientation / math.factorial(k)
    return contracted * (vol.reshape(shape) * factor)


def inner(a, b, metric) -> np.ndarray:
    """Pointwise inner product ``A_I B^I / k!`` of two k-form component arrays."""
    a, b = jets.value(a), jets.value(b)
    ginv = np.linalg.inv(jets.value(metric))
    k = a.ndim - 1
    up = raise_indices(b, ginv)
    return np.einsum(f"n{_subs(k)},n{_subs(k)}->n", a, up) / math.factorial(k)


def norm(a, metric) -> np.ndarray:
    return np.sqrt(np.maximum(inner(a, a, metric), 0.0))


@dataclass(frozen=True)
class TwoFormSplit:
    """Self-dual and anti-self-dual parts of a 2-form at a batch of points."""

    sd: np.ndarray
    asd: np.ndarray

    def total(self):
        return self.sd + self.asd


def sd_asd_split(a, metric, orientation: int = 1) -> TwoFormSplit:
    a = jets.value(a)
    if a.ndim != 3:
        raise FormError("self-dual split applies to 2-forms")
    star = hodge_star(a, jets.value(metric), orientation)
    return TwoFormSplit(0.5 * (a + star), 0.5 * (a - star))


def codifferential(a: Jet, metric: Jet, orientation: int = 1) -> np.ndarray:
    """``delta = -*d*`` on jet-valued components with a jet-valued metric.

    Needs first derivatives of both; returns plain component values.
    """
    if not isinstance(a, Jet) or a.order < 1:
        raise FormError("codifferential needs jet components of order >= 1")
    if a.val.ndim - 1 < 1:
        raise FormError("codifferential of a 0-form is zero by definition")
    star = hodge_star(a, metric, orientation)
    dstar = d_components(star)
    return -hodge_star(dstar, jets.value(metric), orientation)


def codifferential_form(a: KForm, points, metric_fn, orientation: int = 1) -> np.ndarray:
    """Codifferential of a closed-form :class:`KForm` with ``metric_fn(points, order)``."""
    pts = as_points(points)
    return codifferential(a.components(pts, order=1), metric_fn(pts, 1), orientation)


def euclidean_metric(points, order: int = 2) -> Jet:
    n = len(as_points(points))
    return Jet.constant(np.broadcast_to(np.eye(DIM), (n, DIM, DIM)).copy(), order)
