"""Almost Hermitian structures on an orthonormally framed 4-manifold.

A structure is a constant matrix acting on frame vectors, so everything
reduces to contractions with the connection and curvature of
:class:`~qchlab.frame.FrameGeometry`.  The pack exposes ``nabla Omega``,
``alpha = |nabla J| / (2 sqrt 2)``, the Lee form, ``rho*``, the conformal
scalar curvature and the Gray-condition defects, plus certificates for the
claims that are only numerically decidable one way (l.c.K., semi-symmetry).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import jets
from .forms import KForm, codifferential, d_components, wedge
from .frame import Coframe, FrameGeometry, coordinate_components, frame_components, frame_star_matrix, lie_derivative_metric, pairs_from_antisym
from .jets import Jet

SQRT2 = np.sqrt(2.0)


class DegenerateStructureError(ValueError):
    """``|nabla J|`` vanishes (to the threshold) so ``alpha`` has no direction."""


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"
    NOT_LCK = "NOT_LCK"
    SEMI_SYMMETRIC = "SEMI_SYMMETRIC"
    NOT_SEMI_SYMMETRIC = "NOT_SEMI_SYMMETRIC"


@dataclass(frozen=True)
class FrameComplexStructure:
    """Orthogonal almost complex structure with constant frame matrix.

    ``matrix[i, j]`` is the ``E_i`` component of ``J E_j``.
    """

    matrix: np.ndarray
    name: str = "J"

    @classmethod
    def standard(cls) -> "FrameComplexStructure":
        """``J E1 = E2, J E3 = E4``."""
        m = np.zeros((4, 4))
        m[1, 0], m[0, 1], m[3, 2], m[2, 3] = 1, -1, 1, -1
        return cls(m, "J")

    @classmethod
    def opposite(cls) -> "FrameComplexStructure":
        """``J E1 = E2, J E3 = -E4``."""
        m = np.zeros((4, 4))
        m[1, 0], m[0, 1], m[3, 2], m[2, 3] = 1, -1, -1, 1
        return cls(m, "Jbar")

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if np.max(np.abs(m @ m + np.eye(4))) > 1e-12:
            raise ValueError("J^2 != -Id")
        if np.max(np.abs(m.T @ m - np.eye(4))) > 1e-12:
            raise ValueError("J is not orthogonal")

    @property
    def omega(self) -> np.ndarray:
        """Frame components ``Omega_ij = g(J E_i, E_j)``."""
        return self.matrix.T.copy()

    @property
    def orientation(self) -> int:
        """Orientation (relative to ``th1^th2^th3^th4``) in which ``Omega`` is self-dual."""
        w = pairs_from_antisym(self.omega[None])[0]
        return 1 if np.allclose(frame_star_matrix(1) @ w, w) else -1


def kaehler_form(S: FrameComplexStructure, c: Coframe) -> KForm:
    """``Omega = sum_{i<j} Omega_ij th_i ^ th_j`` as a closed-form 2-form."""
    om = S.omega
    out = KForm(2)
    for i in range(4):
        for j in range(i + 1, 4):
            if om[i, j] != 0.0:
                out = out + wedge(c.forms[i], c.forms[j]).scale(om[i, j])
    return out


def frame_pair_forms() -> dict:
    """Frame components of ``Phi, Psi, Phi-bar, Psi-bar`` as 4x4 antisymmetric arrays."""
    def e(i, j):
        a = np.zeros((4, 4))
        a[i, j], a[j, i] = 1.0, -1.0
        return a

    return {
        "Phi": e(0, 2) - e(1, 3),
        "Psi": e(0, 3) + e(1, 2),
        "Phibar": e(0, 2) + e(1, 3),
        "Psibar": e(0, 3) - e(1, 2),
    }


class HermitianPack:
    """Derived data of an almost Hermitian structure on a sampled geometry."""

    def __init__(self, geo: FrameGeometry, S: FrameComplexStructure, degenerate_threshold: float = 1e-10):
        self.geo = geo
        self.S = S
        self.J = S.matrix
        self.threshold = degenerate_threshold

    # -- first-order data (jets of order 1) --------------------------------
    @cached_property
    def nabla_omega_jet(self) -> Jet:
        """``(nabla_{E_k} Omega)(E_i, E_j)`` with axes ``(n, k, i, j)``."""
        G = self.geo.gamma_jet
        om = self.S.omega
        return -(jets.einsum("nmki,mj->nkij", G, om) + jets.einsum("nmkj,im->nkij", G, om))

    @property
    def nabla_omega(self) -> np.ndarray:
        return self.nabla_omega_jet.val

    @cached_property
    def alpha_jet(self) -> Jet:
        """``|nabla J| / (2 sqrt 2)`` (tensor norm over all three indices)."""
        sq = jets.einsum("nkij,nkij->n", self.nabla_omega_jet, self.nabla_omega_jet)
        if np.any(sq.val <= (2 * SQRT2 * self.threshold) ** 2):
            bad = int(np.flatnonzero(sq.val <= (2 * SQRT2 * self.threshold) ** 2)[0])
            raise DegenerateStructureError(
                f"|nabla J| vanishes at {tuple(map(float, self.geo.points[bad]))}; the point lies in the nullity set"
            )
        return jets.sqrt(sq) / (2 * SQRT2)

    @property
    def alpha(self) -> np.ndarray:
        return self.alpha_jet.val

    @cached_property
    def nabla_norm(self) -> np.ndarray:
        return np.sqrt(np.einsum("nkij,nkij->n", self.nabla_omega, self.nabla_omega))

    @cached_property
    def delta_omega_jet(self) -> Jet:
        """``delta Omega(X) = -sum_k (nabla_{E_k} Omega)(E_k, X)``."""
        return -jets.einsum("nkkj->nj", self.nabla_omega_jet)

    @cached_property
    def lee_jet(self) -> Jet:
        """Frame components of the Lee form, ``theta(X) = -1/2 delta Omega(J X)``."""
        return -0.5 * jets.einsum("nj,ji->ni", self.delta_omega_jet, self.J)

    @property
    def lee(self) -> np.ndarray:
        return self.lee_jet.val

    @cached_property
    def lee_coordinate_jet(self) -> Jet:
        return jets.einsum("ni,nim->nm", self.lee_jet, self.geo.theta)

    @cached_property
    def d_lee(self) -> np.ndarray:
        """Frame components of ``d theta``."""
        return frame_components(d_components(self.lee_coordinate_jet), self.geo.E.val)

    @cached_property
    def delta_lee(self) -> np.ndarray:
        """``delta theta`` by ``-*d*`` in coordinates."""
        metric = jets.einsum("nim,nik->nmk", self.geo.theta, self.geo.theta)
        return codifferential(self.lee_coordinate_jet, metric.truncate(1), 1)

    @cached_property
    def delta_lee_frame(self) -> np.ndarray:
        """``delta theta = -sum_k (nabla_{E_k} theta)(E_k)``, second route."""
        Ek_theta = self.geo.directional(self.lee_jet)  # (n, k, i)
        div = np.einsum("nkk->n", Ek_theta) - np.einsum("nmkk,nm->n", self.geo.gamma, self.lee)
        return -div

    @cached_property
    def lee_norm2(self) -> np.ndarray:
        return np.einsum("ni,ni->n", self.lee, self.lee)

    def d_omega_frame(self) -> np.ndarray:
        """``d Omega(E_a, E_b, E_c)`` as the cyclic sum of ``nabla Omega``."""
        N = self.nabla_omega
        return N + np.einsum("nbca->nabc", N) + np.einsum("ncab->nabc", N)

    def lee_identity_residual(self) -> np.ndarray:
        """``d Omega - 2 theta ^ Omega`` (max over frame components)."""
        th, om = self.lee, self.S.omega
        wedge3 = (
            np.einsum("na,bc->nabc", th, om)
            + np.einsum("nb,ca->nabc", th, om)
            + np.einsum("nc,ab->nabc", th, om)
        )
        return np.max(np.abs(self.d_omega_frame() - 2 * wedge3), axis=(1, 2, 3))

    # -- curvature-level data ----------------------------------------------
    @cached_property
    def curvature(self):
        return self.geo.curvature()

    @cached_property
    def ricci_star(self) -> np.ndarray:
        """``rho*(X, Y) = 1/2 tr(Z -> R(X, JY) JZ)``."""
        R, J = self.curvature.R, self.J
        return 0.5 * np.einsum("pb,qa,nxpqa->nxb", J, J, R)

    @cached_property
    def scalar_star(self) -> np.ndarray:
        return np.einsum("nii->n", self.ricci_star)

    @cached_property
    def kappa(self) -> np.ndarray:
        return self.curvature.scalar - 6.0 * (self.lee_norm2 + self.delta_lee)

    @cached_property
    def p_form(self) -> np.ndarray:
        """``p(E_k) = w^2_1(E_k) + w^4_3(E_k)``."""
        G = self.geo.gamma
        return G[:, 1, :, 0] + G[:, 3, :, 2]

    def _jR(self, slots):
        """R with J applied in the given slots (tuple of 0..3)."""
        R = self.curvature.R
        letters = "abcd"
        for s in slots:
            src = "n" + letters
            new = letters[:s] + "z" + letters[s + 1 :]
            R = np.einsum(f"z{letters[s]},n{new}->n{letters}", self.J, R)
        return R

    def gray_residuals(self) -> dict:
        R = self.curvature.R
        jj = self._jR((0, 1))
        g1 = np.max(np.abs(jj - R), axis=(1, 2, 3, 4))
        lhs = R - jj
        rhs = self._jR((0, 2)) + self._jR((0, 3))
        g2 = np.max(np.abs(lhs - rhs), axis=(1, 2, 3, 4))
        g3 = np.max(np.abs(self._jR((0, 1, 2, 3)) - R), axis=(1, 2, 3, 4))
        return {"G1": g1, "G2": g2, "G3": g3}

    def gray_hervella_residual(self) -> np.ndarray:
        rho, rs = self.curvature.ricci, self.ricci_star
        J = self.J
        rho_jj = np.einsum("pa,qb,npq->nab", J, J, rho)
        lhs = 0.5 * (rho + rho_jj) - 0.5 * (rs + np.swapaxes(rs, 1, 2))
        rhs = 0.25 * (self.curvature.scalar - self.scalar_star)[:, None, None] * np.eye(4)
        return np.max(np.abs(lhs - rhs), axis=(1, 2))

    def j_invariance_residual(self) -> dict:
        rho = self.curvature.ricci
        J = self.J
        rho_jj = np.einsum("pa,qb,npq->nab", J, J, rho)
        crit = rho - self.ricci_star - ((self.curvature.scalar - self.kappa) / 6.0)[:, None, None] * np.eye(4)
        return {
            "j_invariance": np.max(np.abs(rho - rho_jj), axis=(1, 2)),
            "criterion": np.max(np.abs(crit), axis=(1, 2)),
        }

    def nijenhuis(self) -> np.ndarray:
        """Max frame component of ``N(E_i, E_j)``."""
        c, J = self.geo.brackets.val, self.J
        t1 = np.einsum("pi,qj,npqk->nijk", J, J, c)
        t2 = np.einsum("kl,pi,npjl->nijk", J, J, c)
        t3 = np.einsum("kl,qj,niql->nijk", J, J, c)
        N = t1 - t2 - t3 - c
        return np.max(np.abs(N), axis=(1, 2, 3))


def nijenhuis(S: FrameComplexStructure, geo: FrameGeometry) -> np.ndarray:
    return HermitianPack(geo, S).nijenhuis()


def ricci_star(pack: HermitianPack):
    return pack.ricci_star, pack.scalar_star


# -- two-term structure of nabla Omega ------------------------------------

@dataclass
class NablaOmega:
    alpha: np.ndarray
    components: np.ndarray
    phi: np.ndarray  # extracted nabla_{E1} Omega / alpha
    psi: np.ndarray  # extracted nabla_{E2} Omega / alpha
    structure_residual: np.ndarray  # vs alpha (th1 (x) Phi + th2 (x) Psi), standard Phi, Psi
    delta_residual: np.ndarray  # delta Omega + 2 alpha th3
    lee_residual: np.ndarray  # theta + alpha th4


def nabla_omega(pack: HermitianPack) -> NablaOmega:
    a = pack.alpha
    N = pack.nabla_omega
    forms = frame_pair_forms()
    model = np.zeros_like(N)
    model[:, 0] = a[:, None, None] * forms["Phi"]
    model[:, 1] = a[:, None, None] * forms["Psi"]
    e3 = np.zeros(4)
    e3[2] = 1
    e4 = np.zeros(4)
    e4[3] = 1
    return NablaOmega(
        alpha=a,
        components=N,
        phi=N[:, 0] / a[:, None, None],
        psi=N[:, 1] / a[:, None, None],
        structure_residual=np.max(np.abs(N - model), axis=(1, 2, 3)),
        delta_residual=np.max(np.abs(pack.delta_omega_jet.val + 2 * a[:, None] * e3), axis=1),
        lee_residual=np.max(np.abs(pack.lee + a[:, None] * e4), axis=1),
    )


def lee_form(pack: HermitianPack) -> np.ndarray:
    return pack.lee


def kappa(pack: HermitianPack) -> np.ndarray:
    return pack.kappa


def gray_residuals(pack: HermitianPack) -> dict:
    return pack.gray_residuals()


def j_invariance_residual(pack: HermitianPack) -> dict:
    return pack.j_invariance_residual()


# -- certificates -------------------------------------------------------

@dataclass
class LckCertificate:
    max_d_lee: float
    sd_residual: float  # self-dual part of d theta in J's orientation
    structure_residual: float  # d(alpha th4) - (E2 alpha Phibar + E1 alpha Psibar)
    verdict: Verdict
    worst_index: int


def lck_certificate(pack: HermitianPack, floor: float = 1e-3) -> LckCertificate:
    """Certify non-l.c.K. by a sampled ``|d theta|`` above ``floor``.

    Below the floor everywhere the verdict is INCONCLUSIVE: a numerically
    small ``d theta`` does not prove local exactness.
    """
    dth = pack.d_lee
    mags = np.sqrt(0.5 * np.einsum("nab,nab->n", dth, dth))
    S = frame_star_matrix(pack.S.orientation)
    v = pairs_from_antisym(dth)
    sd = 0.5 * (v + v @ S.T)
    sd_res = np.max(np.abs(sd), axis=1)
    # structural check from the special-frame identity
    forms = frame_pair_forms()
    try:
        Ea = pack.geo.directional(pack.alpha_jet)  # (n, k)
        model = -(Ea[:, 1, None, None] * forms["Phibar"] + Ea[:, 0, None, None] * forms["Psibar"])
    except DegenerateStructureError:
        # alpha vanishes (Kaehler): the model term is zero
        model = np.zeros_like(dth)
    struct = np.max(np.abs(dth - model), axis=(1, 2))
    worst = int(np.argmax(mags)) if len(mags) else -1
    if len(mags) and np.max(mags) >= floor:
        verdict = Verdict.NOT_LCK
    else:
        verdict = Verdict.INCONCLUSIVE
    return LckCertificate(
        max_d_lee=float(np.max(mags)) if len(mags) else 0.0,
        sd_residual=float(np.max(sd_res)) if len(mags) else 0.0,
        structure_residual=float(np.max(struct)) if len(mags) else 0.0,
        verdict=verdict,
        worst_index=worst,
    )


@dataclass
class QCHFit:
    point: np.ndarray
    coeffs: np.ndarray  # a, b, c
    residual: float
    n_samples: int


def _holomorphic_curvature(R: np.ndarray, J: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``R(X, JX, JX, X)`` for unit frame vectors ``X`` of shape ``(m, 4)``."""
    JX = X @ J.T
    return np.einsum("abcd,ma,mb,mc,md->m", R, X, JX, JX, X)


def stratified_unit_vectors(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Unit frame vectors with ``t = |X_Delta|`` spread over [0, 1]."""
    t = (np.arange(n) + rng.uniform(size=n)) / n
    t[0], t[-1] = 0.0, 1.0
    u = rng.normal(size=(n, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    w = rng.normal(size=(n, 2))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    X = np.concatenate([np.sqrt(1 - t**2)[:, None] * u, t[:, None] * w], axis=1)
    return X, t


def qch_fit(R_point: np.ndarray, S: FrameComplexStructure, n_samples: int = 24, seed: int = 0, point=None) -> QCHFit:
    """Least-squares fit of ``K(X) = R(X, JX, JX, X)`` against ``1, t^2, t^4``
    with ``t = |X_Delta|`` and ``Delta = span(E3, E4)``."""
    if n_samples < 12:
        raise ValueError("need at least 12 sample directions")
    rng = np.random.default_rng(seed)
    X, t = stratified_unit_vectors(n_samples, rng)
    if np.ptp(t) == 0:
        raise ValueError("degenerate sample: all t equal")
    K = _holomorphic_curvature(R_point, S.matrix, X)
    A = np.stack([np.ones_like(t), t**2, t**4], axis=1)
    coeffs, *_ = np.linalg.lstsq(A, K, rcond=None)
    resid = float(np.max(np.abs(A @ coeffs - K)))
    return QCHFit(np.asarray(point) if point is not None else None, coeffs, resid, n_samples)


@dataclass
class SemiSymmetryCertificate:
    max_R_E3: float
    max_R_E4: float
    max_zero_defect: float
    verdict: Verdict


def semi_symmetry_certificate(C, kappa_J: np.ndarray, tol: float = 1e-8, floor: float = 1e-2) -> SemiSymmetryCertificate:
    R = C.R
    r3 = float(np.max(np.abs(R[:, :, :, 2, :]))) if len(R) else 0.0
    r4 = float(np.max(np.abs(R[:, :, :, 3, :]))) if len(R) else 0.0
    zd = float(np.max(np.abs(C.scalar - kappa_J))) if len(R) else 0.0
    if max(r3, r4, zd) <= tol:
        verdict = Verdict.SEMI_SYMMETRIC
    elif zd > floor:
        verdict = Verdict.NOT_SEMI_SYMMETRIC
    else:
        verdict = Verdict.INCONCLUSIVE
    return SemiSymmetryCertificate(r3, r4, zd, verdict)


def conformal_foliation_residual(geo: FrameGeometry, generators=(3, 2)) -> np.ndarray:
    """Defect of ``L_V g|Delta-perp`` from a multiple of ``g|Delta-perp`` for
    the coordinate generators of ``Delta = span(E3, E4)``; max over generators."""
    out = np.zeros(len(geo.points))
    for axis in generators:
        M = lie_derivative_metric(geo, axis, (0, 1))
        lam = 0.5 * np.trace(M, axis1=1, axis2=2)
        dev = M - lam[:, None, None] * np.eye(2)
        out = np.maximum(out, np.max(np.abs(dev), axis=(1, 2)))
    return out


def generators_in_nullity(geo: FrameGeometry, generators=(3, 2)) -> np.ndarray:
    """Component of the coordinate generators outside ``span(E3, E4)``."""
    th = geo.theta.val
    return np.max(np.abs(th[:, :2, list(generators)]), axis=(1, 2))


def coordinate_dtheta(pack: HermitianPack) -> np.ndarray:
    """Coordinate components of ``d theta`` (for reuse by form-level checks)."""
    return d_components(pack.lee_coordinate_jet)


def frame_to_coordinate_two_form(geo: FrameGeometry, A: np.ndarray) -> np.ndarray:
    return coordinate_components(A, geo.theta.val)
