"""Residual suites run by the harness.

A suite evaluates one geometric statement at a batch of sample points and
returns a list of :class:`Check` objects.  A ``bound`` check passes when
every value is at most its threshold; an ``exceeds`` check certifies a
nonvanishing quantity and passes when some value reaches its floor.

Frame indices in the helper ``G`` are 1-based to keep the identities
readable: ``G(i, k, j) = g(nabla_{E_k} E_j, E_i)``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import forms as Fm
from . import hermitian as hm
from .families import Family, ConstructedGeometry, log_of, metric_reproduction_residual, side_condition_report
from .fields import FieldDomainError
from .forms import KForm, exterior_d, wedge
from .frame import FrameGeometry, frame_star_matrix, pairs_from_antisym


class Outcome(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"
    SKIPPED = "SKIPPED"


@dataclass
class Check:
    name: str
    values: np.ndarray  # one nonnegative value per sample point
    threshold: float
    kind: str = "bound"  # or "exceeds"
    inconclusive_below: bool = False  # exceeds-checks that cannot fail, only stay undecided
    aggregate: bool = True  # False for 0/1 consistency flags kept out of the residual column

    def __post_init__(self):
        self.values = np.abs(np.asarray(self.values, float)).reshape(-1)

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def worst(self) -> int:
        return int(np.argmax(self.values)) if self.values.size else -1

    @property
    def outcome(self) -> Outcome:
        if not self.values.size:
            return Outcome.INCONCLUSIVE
        if not np.all(np.isfinite(self.values)):
            return Outcome.FAIL
        if self.kind == "bound":
            return Outcome.PASS if self.max <= self.threshold else Outcome.FAIL
        if self.max >= self.threshold:
            return Outcome.PASS
        return Outcome.INCONCLUSIVE if self.inconclusive_below else Outcome.FAIL


class Context:
    """Lazily computed geometry shared by all suites of one run."""

    def __init__(self, coframe, points, tolerances: dict, construction: ConstructedGeometry | None = None,
                 family: Family = Family.CUSTOM, seed: int = 0):
        self.coframe = coframe
        self.points = np.asarray(points, float).reshape(-1, 4)
        self.construction = construction
        self.family = Family(family)
        self.seed = seed
        self.tolerances = dict(tolerances)
        self.grid_backed = bool(coframe.grid_backed)

    @property
    def tol(self) -> float:
        """Tolerance tier attached to the provenance of the fields."""
        return self.tolerances["grid"] if self.grid_backed else self.tolerances["closed_form"]

    def tight(self, key: str) -> float:
        """A stricter named tolerance, never stricter than the tier allows for grid data."""
        t = self.tolerances.get(key, self.tol)
        return max(t, self.tol) if self.grid_backed else t

    @cached_property
    def geo(self) -> FrameGeometry:
        return FrameGeometry(self.coframe, self.points)

    @cached_property
    def curv(self):
        return self.geo.curvature()

    @cached_property
    def J(self):
        return self.construction.J if self.construction else hm.FrameComplexStructure.standard()

    @cached_property
    def Jbar(self):
        return self.construction.Jbar if self.construction else hm.FrameComplexStructure.opposite()

    @cached_property
    def pack(self) -> hm.HermitianPack:
        return hm.HermitianPack(self.geo, self.J)

    @cached_property
    def pack_bar(self) -> hm.HermitianPack:
        return hm.HermitianPack(self.geo, self.Jbar)

    @cached_property
    def alpha_jet(self):
        return self.construction.alpha.jet(self.points, 1)

    @property
    def alpha(self) -> np.ndarray:
        return self.alpha_jet.val

    @cached_property
    def dln_alpha(self) -> np.ndarray:
        """``E_k ln alpha`` as ``(N, 4)``."""
        return self.geo.directional(self.alpha_jet) / self.alpha[:, None]

    def G(self, i, k, j) -> np.ndarray:
        return self.geo.gamma[:, i - 1, k - 1, j - 1]

    def Eln(self, k) -> np.ndarray:
        return self.dln_alpha[:, k - 1]


@dataclass(frozen=True)
class Suite:
    name: str
    anchor: str
    fn: Callable[[Context], list]
    families: frozenset
    # per-family reported name override, e.g. semi-symmetry vs its negation
    rename: dict = field(default_factory=dict)

    def reported_name(self, family: Family) -> str:
        return f"{family.value}_{self.rename.get(family, self.name)}"


REGISTRY: dict[str, Suite] = {}
CONSTRUCTED = frozenset({Family.THM1, Family.THM2, Family.THM3})
ALL = CONSTRUCTED | {Family.CUSTOM}


def suite(name, anchor, families=CONSTRUCTED, rename=None):
    def deco(fn):
        REGISTRY[name] = Suite(name, anchor, fn, frozenset(families), dict(rename or {}))
        return fn
    return deco


def _max_abs(a, axes):
    return np.max(np.abs(a), axis=axes) if a.size else np.zeros(a.shape[0])


# -- universal identities -------------------------------------------------

@suite("riemann_symmetries", "Riemann symmetries, first Bianchi identity, curvature-operator split", ALL)
def riemann_symmetries(ctx: Context):
    C = ctx.curv
    out = [Check(k, v, ctx.tol) for k, v in C.symmetry_residuals().items()]
    out += [Check(f"weyl_{k}", v, ctx.tol) for k, v in C.weyl_residuals().items()]
    return out


@suite("connection_agreement", "Koszul and Cartan connections agree; torsion-free and metric", ALL)
def connection_agreement(ctx: Context):
    geo = ctx.geo
    return [
        Check("koszul_vs_cartan", _max_abs(geo.gamma - geo.gamma_cartan, (1, 2, 3)), ctx.tol),
        Check("torsion", geo.torsion_residual(), ctx.tol),
        Check("metric_compatibility", geo.connection().antisymmetry_residual(), ctx.tol),
        Check("frame_duality", geo.duality_residual(), ctx.tol),
    ]


@suite("gray_hervella", "Gray-Hervella identity relating rho, rho* and tau - tau*", ALL)
def gray_hervella(ctx: Context):
    return [Check("identity_J", ctx.pack.gray_hervella_residual(), ctx.tol),
            Check("identity_Jbar", ctx.pack_bar.gray_hervella_residual(), ctx.tol)]


@suite("dd_zero", "d(d w) = 0 for the coframe forms and their products", ALL)
def dd_zero(ctx: Context):
    pts = ctx.points
    forms = list(ctx.coframe.forms)
    tol = ctx.tight("dd_zero")
    vals = np.zeros(len(pts))
    # symbolic route: d applied twice to the closed-form coefficients
    candidates = forms + [wedge(forms[0], forms[1]), wedge(forms[2], forms[3])]
    for a in candidates:
        dda = exterior_d(exterior_d(a))
        if dda.coeffs:
            vals = np.maximum(vals, _max_abs(dda(pts), tuple(range(1, dda.degree + 1))))
    sym = Check("symbolic", vals, tol)
    # jet route: numerical d of numerical d
    th = ctx.geo.theta  # (N, i, mu) jet of order 2
    jet_vals = np.zeros(len(pts))
    for i in range(4):
        comp = th[:, i]
        d1 = comp.d()  # (N, mu, nu), order 1
        d1 = type(d1)(np.swapaxes(d1.val, 1, 2) - d1.val, np.swapaxes(d1.grad, 2, 3) - d1.grad, None)
        d2 = Fm.d_components(d1)
        jet_vals = np.maximum(jet_vals, _max_abs(d2, (1, 2, 3)))
    return [sym, Check("jet", jet_vals, tol)]


@suite("hodge_involution", "** = (-1)^(k(4-k)) on k-forms for the coframe metric", ALL)
def hodge_involution(ctx: Context):
    pts = ctx.points
    g = ctx.geo.metric
    tol = ctx.tight("hodge")
    forms = list(ctx.coframe.forms)
    samples = {
        0: [np.ones(len(pts))],
        1: [f(pts) for f in forms],
        2: [wedge(a, b)(pts) for a, b in itertools.combinations(forms, 2)],
        3: [wedge(wedge(forms[0], forms[1]), forms[3])(pts), wedge(wedge(forms[1], forms[2]), forms[3])(pts)],
    }
    out = []
    for k, arrs in samples.items():
        sign = (-1) ** (k * (4 - k))
        vals = np.zeros(len(pts))
        for A in arrs:
            SS = Fm.hodge_star(Fm.hodge_star(A, g), g)
            diff = SS - sign * A
            vals = np.maximum(vals, _max_abs(diff, tuple(range(1, diff.ndim))) if diff.ndim > 1 else np.abs(diff))
        out.append(Check(f"degree_{k}", vals, tol))
    return out


# -- family constructions ----------------------------------------------------

@suite("profile_pde", "Delta ln H equals the family right-hand side")
def profile_pde(ctx: Context):
    return [Check("pde", ctx.construction.pde_residual(ctx.points), ctx.tol)]


@suite("side_conditions", "frame coefficient relations k, l, m, n, f")
def side_conditions(ctx: Context):
    rep = side_condition_report(ctx.construction, ctx.points)
    return [Check(k, v, ctx.tol) for k, v in rep.items()]


@suite("metric_reproduction", "sum th_i (x) th_i equals the displayed metric")
def metric_reproduction(ctx: Context):
    return [Check("metric", metric_reproduction_residual(ctx.construction, ctx.points), ctx.tight("metric"))]


@suite("kaehler_closed", "the Kaehler form of the opposite structure is parallel and closed")
def kaehler_closed(ctx: Context):
    Om = hm.kaehler_form(ctx.Jbar, ctx.coframe)
    dOm = exterior_d(Om)
    d_vals = _max_abs(dOm(ctx.points), (1, 2, 3)) if dOm.coeffs else np.zeros(len(ctx.points))
    return [Check("d_omega_bar", d_vals, ctx.tol),
            Check("nabla_omega_bar", _max_abs(ctx.pack_bar.nabla_omega, (1, 2, 3)), ctx.tol)]


@suite("integrability", "Nijenhuis tensors of J and of the opposite structure vanish")
def integrability(ctx: Context):
    return [Check("nijenhuis_J", ctx.pack.nijenhuis(), ctx.tol),
            Check("nijenhuis_Jbar", ctx.pack_bar.nijenhuis(), ctx.tol)]


@suite("ricci_j_invariant", "Ricci tensor is J-invariant; rho - rho* = (tau - kappa)/6 g")
def ricci_j_invariant(ctx: Context):
    r = ctx.pack.j_invariance_residual()
    return [Check("j_invariance", r["j_invariance"], ctx.tol), Check("rho_minus_rho_star", r["criterion"], ctx.tol)]


@suite("lee_form", "Lee form equals -alpha th4 with the family's alpha")
def lee_form(ctx: Context):
    lee = ctx.pack.lee
    model = np.zeros_like(lee)
    model[:, 3] = -ctx.alpha
    return [Check("lee_vs_alpha_th4", _max_abs(lee - model, (1,)), ctx.tol),
            Check("alpha_extraction", ctx.pack.alpha - np.abs(ctx.alpha), ctx.tol)]


@suite("nabla_omega_structure", "nabla Omega = alpha(th1 Phi + th2 Psi), delta Omega = -2 alpha th3")
def nabla_omega_structure(ctx: Context):
    no = hm.nabla_omega(ctx.pack)
    return [Check("two_term_structure", no.structure_residual, ctx.tol),
            Check("codifferential", no.delta_residual, ctx.tol),
            Check("lee", no.lee_residual, ctx.tol),
            Check("lee_identity", ctx.pack.lee_identity_residual(), ctx.tol)]


@suite("connection_identities", "connection coefficients of a standard frame (a)-(e)")
def connection_identities(ctx: Context):
    G, E, a = ctx.G, ctx.Eln, ctx.alpha
    t = ctx.tol
    return [
        Check("a_G3_11", G(3, 1, 1) - E(3), t),
        Check("a_G3_22", G(3, 2, 2) - E(3), t),
        Check("b_G3_44", G(3, 4, 4) + E(3), t),
        Check("b_G4_21", G(4, 2, 1) + E(3), t),
        Check("b_G4_12", G(4, 1, 2) - E(3), t),
        Check("c_G3_21", G(3, 2, 1) + G(3, 1, 2), t),
        Check("c_G4_11", G(4, 1, 1) - G(4, 2, 2), t),
        Check("d", -G(3, 2, 1) + G(4, 2, 2) - a, t),
        Check("e", G(4, 3, 3) - (-E(4) + a), t),
    ]


@suite("lee_derivative_asd", "G4_13 = -E2 ln a, G4_23 = E1 ln a, d theta anti-self-dual")
def lee_derivative_asd(ctx: Context):
    G, E = ctx.G, ctx.Eln
    dth = ctx.pack.d_lee
    v = pairs_from_antisym(dth)

    def part(orientation, sign):
        S = frame_star_matrix(orientation)
        return _max_abs(0.5 * (v + sign * v @ S.T), (1,))

    return [
        Check("G4_13", G(4, 1, 3) + E(2), ctx.tol),
        Check("G4_23", G(4, 2, 3) - E(1), ctx.tol),
        Check("self_dual_part_J", part(ctx.J.orientation, +1), ctx.tol),
        Check("anti_self_dual_part_Jbar", part(ctx.Jbar.orientation, -1), ctx.tol),
    ]


@suite("nullity_geodesic", "span(E3, E4) is a totally geodesic foliation; vanishing set of Gamma")
def nullity_geodesic(ctx: Context):
    G, E, a = ctx.G, ctx.Eln, ctx.alpha
    t = ctx.tol
    out = [Check("E3_alpha", E(3) * a, t)]
    for i, k, j in [(3, 1, 1), (3, 2, 2), (3, 4, 4), (4, 2, 1), (4, 1, 2)]:
        out.append(Check(f"G{i}_{k}{j}", G(i, k, j), t))
    out += [
        Check("G3_21", -G(3, 2, 1) - a / 2, t),
        Check("G3_12", G(3, 1, 2) - a / 2, t),
        Check("G4_11", G(4, 1, 1) - a / 2, t),
        Check("G4_22", G(4, 2, 2) - a / 2, t),
    ]
    geod = np.zeros(len(ctx.points))
    for i in (1, 2):
        for k in (3, 4):
            for j in (3, 4):
                geod = np.maximum(geod, np.abs(G(i, k, j)))
    out.append(Check("totally_geodesic", geod, t))
    out.append(Check("nabla_E4_E4", _max_abs(ctx.geo.gamma[:, :, 3, 3], (1,)), t))
    return out


@suite("alpha_law", "E4 ln alpha = alpha / 2 exactly when semi-symmetric",
       rename={Family.THM2: "alpha_law_violated", Family.THM3: "alpha_law_violated"})
def alpha_law(ctx: Context):
    defect = ctx.Eln(4) - ctx.alpha / 2
    if ctx.family is Family.THM1:
        return [Check("E4_ln_alpha", defect, ctx.tight("alpha_law")),
                Check("G4_33", ctx.G(4, 3, 3) - ctx.alpha / 2, ctx.tol)]
    return [Check("E4_ln_alpha_nonzero", defect, ctx.tolerances["semi_symmetry_floor"], kind="exceeds")]


@suite("frame_brackets", "bracket relations of a frame with th1 = f dx, th2 = f dy")
def frame_brackets(ctx: Context):
    G, E, a = ctx.G, ctx.Eln, ctx.alpha
    c = ctx.geo.brackets.val  # [E_a, E_b] = sum_k c[n, a, b, k] E_k
    n = len(ctx.points)
    z = np.zeros(n)

    def vec(*comps):
        return np.stack(comps, axis=1)

    expected = {
        (1, 4): vec(-a / 2, z, E(2), z),
        (2, 4): vec(z, -a / 2, -E(1), z),
        (1, 3): vec(z, z, z, -E(2)),
        (2, 3): vec(z, z, z, E(1)),
        (3, 4): vec(z, z, -(-E(4) + a), z),
        (1, 2): vec(G(1, 1, 2), -G(2, 2, 1), a, z),
    }
    out = [Check("G1_32", G(1, 3, 2) - a / 2, ctx.tol), Check("G2_41", G(2, 4, 1), ctx.tol)]
    for (i, j), v in expected.items():
        out.append(Check(f"E{i}E{j}", _max_abs(c[:, i - 1, j - 1] - v, (1,)), ctx.tol))
    return out


@suite("coframe_differentials", "d th_i expanded in th_a ^ th_b, coefficient-wise")
def coframe_differentials(ctx: Context):
    G, E, a = ctx.G, ctx.Eln, ctx.alpha
    D = ctx.geo.coframe_differentials  # D[n, i, a, b] = d th_i(E_a, E_b)
    n = len(ctx.points)

    def two_form(terms):
        A = np.zeros((n, 4, 4))
        for (p, q), coef in terms.items():
            A[:, p - 1, q - 1] += coef
            A[:, q - 1, p - 1] -= coef
        return A

    expected = [
        two_form({(1, 2): G(2, 1, 1), (1, 4): a / 2}),
        two_form({(1, 2): -G(1, 2, 2), (2, 4): a / 2}),
        two_form({(1, 2): -a, (1, 4): -E(2), (2, 4): E(1), (3, 4): -E(4) + a}),
        two_form({(1, 3): E(2), (2, 3): -E(1)}),
    ]
    return [Check(f"d_th{i + 1}", _max_abs(D[:, i] - expected[i], (1, 2)), ctx.tol) for i in range(4)]


@suite("conformal_foliation", "L_V g is conformal on span(E1, E2) for V tangent to the nullity leaves")
def conformal_foliation(ctx: Context):
    return [Check("lie_derivative", hm.conformal_foliation_residual(ctx.geo), ctx.tol),
            Check("generators_tangent", hm.generators_in_nullity(ctx.geo), ctx.tol)]


@suite("gray_conditions", "G1 for the first family; G2 without G1 otherwise")
def gray_conditions(ctx: Context):
    r = ctx.pack.gray_residuals()
    zd = ctx.curv.scalar - ctx.pack.kappa
    if ctx.family is Family.THM1:
        g1_ok = r["G1"] <= ctx.tol
        zd_ok = np.abs(zd) <= ctx.tol
        return [Check("G1", r["G1"], ctx.tol), Check("G2", r["G2"], ctx.tol), Check("G3", r["G3"], ctx.tol),
                Check("G1_vs_zero_defect_routes", (g1_ok != zd_ok).astype(float), 0.5, aggregate=False)]
    floor = ctx.tolerances["semi_symmetry_floor"]
    return [Check("G2", r["G2"], ctx.tol), Check("G3", r["G3"], ctx.tol),
            Check("G1_fails", r["G1"], floor, kind="exceeds")]


@suite("semi_symmetric", "R(X,Y)E3 = R(X,Y)E4 = 0 and tau = kappa",
       rename={Family.THM2: "not_semi_symmetric", Family.THM3: "not_semi_symmetric"})
def semi_symmetric(ctx: Context):
    R = ctx.curv.R
    zd = ctx.curv.scalar - ctx.pack.kappa
    if ctx.family is Family.THM1:
        return [Check("R_E3", _max_abs(R[:, :, :, 2, :], (1, 2, 3)), ctx.tol),
                Check("R_E4", _max_abs(R[:, :, :, 3, :], (1, 2, 3)), ctx.tol),
                Check("tau_minus_kappa", zd, ctx.tol)]
    return [Check("tau_minus_kappa", zd, ctx.tolerances["semi_symmetry_floor"], kind="exceeds")]


@suite("ricci_star", "rho* = rho", families={Family.THM1})
def ricci_star_suite(ctx: Context):
    rho = ctx.curv.ricci
    rs = ctx.pack.ricci_star
    return [Check("rho_star_minus_rho", _max_abs(rs - rho, (1, 2)), ctx.tol)]


@suite("scalar_curvature", "tau = -2 Delta ln h / (z^2 h^2) - 8 / z^2", families={Family.THM1})
def scalar_curvature(ctx: Context):
    h = ctx.construction.h
    lh = log_of(h) if not h.is_zero else h
    jl = lh.jet(ctx.points, 2)
    lap = jl.hess[0, 0] + jl.hess[1, 1]
    z = ctx.points[:, 2]
    hv = h(ctx.points)
    tau = -2 * lap / (z**2 * hv**2) - 8 / z**2
    return [Check("tau", ctx.curv.scalar - tau, ctx.tol)]


@suite("qch", "holomorphic sectional curvature of the Kaehler structure is quartic in |X_Delta|")
def qch(ctx: Context):
    R = ctx.curv.R
    vals = np.array([hm.qch_fit(R[i], ctx.Jbar, n_samples=40, seed=ctx.seed + i).residual for i in range(len(R))])
    return [Check("quartic_fit", vals, ctx.tight("qch"))]


@suite("not_lck", "d theta is nonzero and anti-self-dual: J is not locally conformally Kaehler")
def not_lck(ctx: Context):
    pk = ctx.pack
    dth = pk.d_lee
    mags = np.sqrt(0.5 * np.einsum("nab,nab->n", dth, dth))
    v = pairs_from_antisym(dth)
    S = frame_star_matrix(ctx.J.orientation)
    sd = _max_abs(0.5 * (v + v @ S.T), (1,))
    forms = hm.frame_pair_forms()
    Ea = ctx.geo.directional(pk.alpha_jet)
    model = -(Ea[:, 1, None, None] * forms["Phibar"] + Ea[:, 0, None, None] * forms["Psibar"])
    return [
        Check("self_dual_part", sd, ctx.tol),
        Check("structure", _max_abs(dth - model, (1, 2)), ctx.tol),
        Check("d_theta_nonzero", mags, ctx.tolerances["lck_floor"], kind="exceeds", inconclusive_below=True),
    ]


def applicable(family: Family) -> list[str]:
    return [name for name, s in REGISTRY.items() if Family(family) in s.families]


def resolve(names, family: Family) -> list[str]:
    """Map user suite names (bare or family-prefixed) onto registry keys."""
    family = Family(family)
    if not names:
        return applicable(family)
    reported = {REGISTRY[k].reported_name(family): k for k in applicable(family)}
    prefix = f"{family.value}_"
    bare = {name[len(prefix):]: k for name, k in reported.items()}
    out = []
    for raw in names:
        raw = raw.strip()
        if not raw:
            continue
        if raw in REGISTRY:
            key = raw
        elif raw in reported:
            key = reported[raw]
        elif raw in bare:
            key = bare[raw]
        else:
            raise KeyError(f"unknown suite {raw!r}; known: {sorted(reported)}")
        if family not in REGISTRY[key].families:
            raise KeyError(f"suite {raw!r} does not apply to family {family.value}")
        if key not in out:
            out.append(key)
    return out


__all__ = ["Check", "Context", "Outcome", "Suite", "REGISTRY", "applicable", "resolve", "FieldDomainError"]
