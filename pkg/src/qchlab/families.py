"""Explicit coframes of the three QCH families built from a pair ``(h, H)``.

Each family lives on ``U x N`` with ``(x, y) in U`` and ``(z, t) in N``:

=======  ================  ==================  ======================  ===============
family   frame scale f     alpha               PDE for ln H            z range
=======  ================  ==================  ======================  ===============
THM1     z h               -2 / z              2 h^2                   z < 0
THM2     cos(z/2) h        tan(z/2)            h^2 / 2 - H^2           0 < z < pi
THM3     sinh(z/2) h       -coth(z/2)          h^2 / 2 + H^2           z < 0
=======  ================  ==================  ======================  ===============

The coframe formulas are used verbatim, including the negative frame scale
for THM1 and THM3; the metric only sees ``f^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from .fields import ScalarField, as_field
from .forms import KForm
from .frame import Coframe, FrameGeometry
from .hermitian import FrameComplexStructure


class Family(str, enum.Enum):
    THM1 = "thm1"
    THM2 = "thm2"
    THM3 = "thm3"
    CUSTOM = "custom"


class ConstraintViolation(ValueError):
    """The profile PDE for ``ln H`` fails beyond tolerance."""


DEFAULT_BOX = {
    Family.THM1: {"x": (-1.0, 1.0), "y": (-1.0, 1.0), "z": (-3.0, -0.5), "t": (0.0, 4 * math.pi)},
    Family.THM2: {"x": (-1.0, 1.0), "y": (-1.0, 1.0), "z": (0.3, math.pi - 0.3), "t": (0.0, 2 * math.pi)},
    Family.THM3: {"x": (-1.0, 1.0), "y": (-1.0, 1.0), "z": (-3.0, -0.5), "t": (0.0, 2 * math.pi)},
    Family.CUSTOM: {"x": (-1.0, 1.0), "y": (-1.0, 1.0), "z": (-1.0, 1.0), "t": (-1.0, 1.0)},
}

# profile PDE  Delta ln H = c1 h^2 + c2 H^2
PDE_COEFFS = {Family.THM1: (2.0, 0.0), Family.THM2: (0.5, -1.0), Family.THM3: (0.5, 1.0)}


def _z_distance_thm1(p):
    return np.abs(p[:, 2])


def _z_distance_thm2(p):
    return np.minimum(np.abs(p[:, 2]), np.abs(math.pi - p[:, 2]))


SINGULAR_DISTANCE = {
    Family.THM1: _z_distance_thm1,
    Family.THM2: _z_distance_thm2,
    Family.THM3: _z_distance_thm1,
}


@dataclass
class FamilySpec:
    family: Family
    h: ScalarField
    H: ScalarField
    box: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.family = Family(self.family)
        self.h = as_field(self.h)
        self.H = as_field(self.H)
        box = dict(DEFAULT_BOX[self.family])
        box.update(self.box or {})
        self.box = {k: tuple(float(v) for v in box[k]) for k in "xyzt"}


def log_of(H: ScalarField) -> ScalarField:
    """``ln H`` without a redundant ``ln(exp(.))`` when ``H`` was built as an exponential."""
    if isinstance(H, F.Func) and H.name == "exp":
        return H.a
    return F.ln(H)


@dataclass
class ConstructedGeometry:
    family: Family
    coframe: Coframe
    alpha: ScalarField
    J: FrameComplexStructure
    Jbar: FrameComplexStructure
    f: ScalarField
    beta: ScalarField
    h: ScalarField
    H: ScalarField
    l2: ScalarField
    n2: ScalarField
    conformal_factor: ScalarField  # factor c in g = c^2 g_Sigma + th3^2 + th4^2

    @property
    def grid_backed(self) -> bool:
        return self.coframe.grid_backed

    def geometry(self, points) -> FrameGeometry:
        return FrameGeometry(self.coframe, points)

    def pde_residual(self, points) -> np.ndarray:
        return pde_residual(self.family, self.h, self.H, points)


def pde_residual(family: Family, h: ScalarField, H: ScalarField, points) -> np.ndarray:
    """``Delta ln H - (c1 h^2 + c2 H^2)`` at the (x, y) of each point."""
    c1, c2 = PDE_COEFFS[Family(family)]
    u = log_of(H)
    jet = u.jet(points, 2)
    lap = jet.hess[0, 0] + jet.hess[1, 1]
    return lap - c1 * h(points) ** 2 - c2 * H(points) ** 2


def check_pde(family, h, H, points, tol: float) -> None:
    r = pde_residual(family, h, H, points)
    worst = int(np.argmax(np.abs(r)))
    if np.abs(r[worst]) > tol:
        raise ConstraintViolation(
            f"{Family(family).value}: PDE residual {r[worst]:.3e} exceeds {tol:.1e} at {tuple(map(float, np.asarray(points)[worst]))}"
        )


def _assemble(family, spec, f, theta3, theta4, alpha, beta, factor, l2, n2):
    th1 = KForm.one_form([f, 0, 0, 0])
    th2 = KForm.one_form([0, f, 0, 0])
    coframe = Coframe((th1, th2, theta3, theta4), 1, SINGULAR_DISTANCE[family], family.value)
    return ConstructedGeometry(
        family=family,
        coframe=coframe,
        alpha=alpha,
        J=FrameComplexStructure.standard(),
        Jbar=FrameComplexStructure.opposite(),
        f=f,
        beta=beta,
        h=spec.h,
        H=spec.H,
        l2=l2,
        n2=n2,
        conformal_factor=factor,
    )


def _maybe_check(spec, points, tol):
    if points is not None:
        check_pde(spec.family, spec.h, spec.H, points, tol)


def build_theorem1(spec: FamilySpec, check_points=None, tol: float = 1e-8) -> ConstructedGeometry:
    _maybe_check(spec, check_points, tol)
    x, y, z, t = F.X, F.Y, F.Z, F.T
    h, H = spec.h, spec.H
    u = log_of(H)
    l2, n2 = -u.partial(1), u.partial(0)
    f = z * h
    half = t / 2
    theta3 = KForm.one_form([F.cos(half) * H + z * l2, -F.sin(half) * H + z * n2, 0, -z / 2])
    theta4 = KForm.one_form([-F.sin(half) * H, -F.cos(half) * H, 1, 0])
    alpha = F.Const(-2.0) / z
    return _assemble(Family.THM1, spec, f, theta3, theta4, alpha, F.ONE / alpha, z, l2, n2)


def build_theorem2(spec: FamilySpec, check_points=None, tol: float = 1e-8) -> ConstructedGeometry:
    _maybe_check(spec, check_points, tol)
    z, t = F.Z, F.T
    h, H = spec.h, spec.H
    u = log_of(H)
    l2, n2 = -u.partial(1), u.partial(0)
    f = F.cos(z / 2) * h
    theta3 = KForm.one_form(
        [
            -(F.cos(t) * F.cos(z) * H + F.sin(z) * l2),
            -(-F.sin(t) * F.cos(z) * H + F.sin(z) * n2),
            0,
            F.sin(z),
        ]
    )
    theta4 = KForm.one_form([-F.sin(t) * H, -F.cos(t) * H, 1, 0])
    alpha = F.tan(z / 2)
    return _assemble(Family.THM2, spec, f, theta3, theta4, alpha, F.sin(z), F.cos(z / 2), l2, n2)


def build_theorem3(spec: FamilySpec, check_points=None, tol: float = 1e-8) -> ConstructedGeometry:
    _maybe_check(spec, check_points, tol)
    z, t = F.Z, F.T
    h, H = spec.h, spec.H
    u = log_of(H)
    l2, n2 = u.partial(1), -u.partial(0)
    f = F.sinh(z / 2) * h
    theta3 = KForm.one_form(
        [
            -(-F.sin(t) * F.cosh(z) * H + F.sinh(z) * l2),
            -(F.cos(t) * F.cosh(z) * H + F.sinh(z) * n2),
            0,
            F.sinh(z),
        ]
    )
    theta4 = KForm.one_form([-F.cos(t) * H, -F.sin(t) * H, 1, 0])
    alpha = -(F.cosh(z / 2) / F.sinh(z / 2))
    return _assemble(Family.THM3, spec, f, theta3, theta4, alpha, F.sinh(z), F.sinh(z / 2), l2, n2)


BUILDERS = {Family.THM1: build_theorem1, Family.THM2: build_theorem2, Family.THM3: build_theorem3}


def build(spec: FamilySpec, check_points=None, tol: float = 1e-8) -> ConstructedGeometry:
    if spec.family is Family.CUSTOM:
        raise ValueError("CUSTOM coframes are supplied directly, not built from (h, H)")
    return BUILDERS[spec.family](spec, check_points, tol)


# -- side conditions ----------------------------------------------------

def frame_coefficients(geo: FrameGeometry):
    """``k, l, m, n`` in ``E1 = d_x/f + k d_z + l d_t``, ``E2 = d_y/f + m d_z + n d_t``
    as order-2 jets."""
    E = geo.E
    return E[:, 0, 2], E[:, 0, 3], E[:, 1, 2], E[:, 1, 3]


def side_condition_report(g: ConstructedGeometry, points) -> dict:
    """Residuals of the first-order relations among ``k, l, m, n, f``."""
    geo = g.geometry(points)
    k, l, m, n = frame_coefficients(geo)
    fj = g.f.jet(points, 1)
    z = np.asarray(points)[:, 2]
    Z_, T_ = 2, 3

    def dz(j):
        return j.grad[Z_]

    def dt(j):
        return j.grad[T_]

    H = g.H(points)
    t = np.asarray(points)[:, 3]
    f = fj.val
    out = {}
    if g.family is Family.THM1:
        out["kf"] = k.val * f - np.sin(t / 2) * H
        out["mf"] = m.val * f - np.cos(t / 2) * H
        out["f_z"] = fj.grad[Z_] - f / z
        out["2k_t-m"] = 2 * dt(k) - m.val
        out["2m_t+k"] = 2 * dt(m) + k.val
        out["l_t"] = dt(l) + k.val / z
        out["n_t"] = dt(n) + m.val / z
        out["k_z"] = dz(k) + k.val / z
        out["m_z"] = dz(m) + m.val / z
        out["l_z"] = dz(l) + l.val / z + 2 * m.val / z**2
    elif g.family is Family.THM2:
        th = np.tan(z / 2)
        out["kf"] = k.val * f - np.sin(t) * H
        out["mf"] = m.val * f - np.cos(t) * H
        out["f_z"] = fj.grad[Z_] + 0.5 * th * f
        out["k_t-m"] = dt(k) - m.val
        out["m_t+k"] = dt(m) + k.val
        out["l_t"] = dt(l) + k.val / np.tan(z)
        out["n_t"] = dt(n) + m.val / np.tan(z)
        out["k_z"] = dz(k) - 0.5 * th * k.val
        out["m_z"] = dz(m) - 0.5 * th * m.val
        out["l_z"] = dz(l) - 0.5 * th * l.val + m.val / np.sin(z) ** 2
    elif g.family is Family.THM3:
        ch = 1 / np.tanh(z / 2)
        out["kf"] = k.val * f - np.cos(t) * H
        out["mf"] = m.val * f - np.sin(t) * H
        out["f_z"] = fj.grad[Z_] - 0.5 * ch * f
        out["k_t+m"] = dt(k) + m.val
        out["m_t-k"] = dt(m) - k.val
        out["l_t"] = dt(l) + k.val / np.tanh(z)
        out["n_t"] = dt(n) + m.val / np.tanh(z)
        out["k_z"] = dz(k) + 0.5 * ch * k.val
        out["m_z"] = dz(m) + 0.5 * ch * m.val
        out["l_z"] = dz(l) + 0.5 * ch * l.val - m.val / np.sinh(z) ** 2
    return out


def metric_reproduction_residual(g: ConstructedGeometry, points) -> np.ndarray:
    """``sum th_i (x) th_i`` against ``c^2 h^2 (dx^2 + dy^2) + th3^2 + th4^2``."""
    geo = g.geometry(points)
    th = geo.theta.val
    c = g.conformal_factor(points)
    h = g.h(points)
    displayed = np.zeros_like(geo.metric)
    displayed[:, 0, 0] = displayed[:, 1, 1] = (c * h) ** 2
    displayed += np.einsum("nm,nk->nmk", th[:, 2], th[:, 2]) + np.einsum("nm,nk->nmk", th[:, 3], th[:, 3])
    return np.max(np.abs(geo.metric - displayed), axis=(1, 2))


# -- user-supplied coframes ---------------------------------------------------

def custom_coframe(rows, name: str = "custom", singular_distance=None) -> Coframe:
    """Coframe from four rows of four coefficient expressions on dx, dy, dz, dt."""
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise ValueError("a custom coframe needs 4 rows of 4 coefficients")
    forms = tuple(KForm.one_form([as_field(c) for c in row]) for row in rows)
    return Coframe(forms, 1, singular_distance, name)


def random_coframe_rows(seed: int, amplitude: float = 0.12) -> list[list[str]]:
    """Seeded closed-form coefficient rows, diagonally dominant on the unit box.

    Each entry is the identity entry plus ``a sin(k.x + c) + b p(x)`` with a
    small quadratic ``p``, so every coefficient has nontrivial second
    derivatives while the matrix stays invertible on ``[-1, 1]^4``.
    """
    rng = np.random.default_rng(seed)
    coords = ("x", "y", "z", "t")
    rows = []
    for i in range(4):
        row = []
        for mu in range(4):
            a = amplitude * rng.uniform(-1, 1)
            k = rng.uniform(-1.5, 1.5, size=4)
            c = rng.uniform(0, 2 * math.pi)
            arg = " + ".join(f"{k[j]:.6f}*{coords[j]}" for j in range(4))
            b = 0.25 * amplitude * rng.uniform(-1, 1)
            p, q = rng.choice(4, size=2)
            term = f"{a:.6f}*sin({arg} + {c:.6f}) + {b:.6f}*{coords[p]}*{coords[q]}"
            row.append(f"{1.0 if i == mu else 0.0} + {term}")
        rows.append(row)
    return rows


def random_coframe(seed: int, amplitude: float = 0.12) -> Coframe:
    return custom_coframe(random_coframe_rows(seed, amplitude), name=f"random-{seed}")
