"""Orthonormal coframes and the Riemannian geometry they determine.

Everything here is computed on a batch of points at once.  The coframe
coefficients are evaluated as order-2 jets; the frame is their inverse
transpose, bracket coefficients and connection coefficients then carry one
order of exact derivative, which is what the curvature needs.

Index conventions (0-based in code, 1-based in the docs):

* ``theta[n, i, mu]`` -- coefficient of ``d x^mu`` in ``th_i``.
* ``E[n, i, mu]`` -- coefficient of ``d_mu`` in ``E_i``.
* ``c[n, a, b, k]`` -- ``[E_a, E_b] = sum_k c[a, b, k] E_k``.
* ``gamma[n, i, k, j]`` -- ``Gamma^i_{kj} = g(nabla_{E_k} E_j, E_i)``.
* ``R[n, a, b, c, d] = g(R(E_a, E_b) E_c, E_d)`` with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``.
* The curvature operator on the basis ``th_i ^ th_j`` (i<j, ordered 12, 13,
  14, 23, 24, 34) is ``Rop[P, Q] = -R[p1, p2, q1, q2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jets
from .fields import as_points
from .forms import KForm, levi_civita
from .jets import Jet

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


class SingularFrameError(ValueError):
    """The coframe matrix is not invertible (or the metric not SPD) at a point."""


@dataclass(frozen=True)
class Coframe:
    """Four 1-forms declared orthonormal, plus an orientation and a singular locus.

    ``orientation`` picks the volume form ``orientation * th1^th2^th3^th4``.
    ``singular_distance`` maps ``(N, 4)`` points to a distance-like measure from
    the locus where the construction breaks down; sampling keeps it above a
    margin.
    """

    forms: tuple
    orientation: int = 1
    singular_distance: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "coframe"

    def __post_init__(self):
        if len(self.forms) != 4 or any(f.degree != 1 for f in self.forms):
            raise ValueError("a coframe needs exactly four 1-forms")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def grid_backed(self) -> bool:
        return any(f.grid_backed for f in self.forms)

    def matrix(self, points, order: int = 2) -> Jet:
        """Jet of ``theta[n, i, mu]``."""
        pts = as_points(points)
        rows = [f.components(pts, order) for f in self.forms]
        return jets.stack(rows, axis=1)

    def metric(self, points, order: int = 2) -> Jet:
        th = self.matrix(points, order)
        return jets.einsum("nim,nik->nmk", th, th)

    def coordinate_orientation(self, points) -> np.ndarray:
        """Sign of the volume form relative to ``dx^dy^dz^dt`` at each point."""
        th = self.matrix(points, order=0).val
        return self.orientation * np.sign(np.linalg.det(th)).astype(int)

    def with_orientation(self, orientation: int) -> "Coframe":
        return Coframe(self.forms, orientation, self.singular_distance, self.name)


def euclidean_coframe() -> Coframe:
    return Coframe(tuple(KForm.basis(i) for i in range(4)), name="euclidean")


def _transpose(a):
    return jets.einsum("nij->nji", a)


@dataclass
class FrameFields:
    """Dual frame ``E_1..E_4`` of a coframe, inverted at evaluation points."""

    coframe: Coframe

    def jet(self, points, order: int = 2) -> Jet:
        th = self.coframe.matrix(points, order)
        d = np.linalg.det(th.val)
        scale = np.max(np.abs(th.val), axis=(1, 2))
        bad = ~(np.abs(d) > 1e-14 * np.maximum(scale, 1e-300) ** 4)
        if np.any(bad):
            p = tuple(map(float, as_points(points)[int(np.flatnonzero(bad)[0])]))
            raise SingularFrameError(f"coframe matrix is singular at {p}")
        return _transpose(jets.inv(th))


def frame_fields(coframe: Coframe) -> FrameFields:
    return FrameFields(coframe)


def frame_components(a, E) -> np.ndarray:
    """Frame components ``A(E_a, E_b, ...)`` of coordinate form components."""
    a, E = jets.value(a), jets.value(E)
    k = a.ndim - 1
    for i in range(k):
        letters = list("abcd"[:k])
        src = "n" + "".join(letters)
        letters[i] = "z"
        dst = "n" + "".join(letters)
        a = np.einsum(f"nz{'abcd'[i]},{src}->{dst}", E, a)
    return a


def coordinate_components(a, theta):
    """Coordinate components of frame form components (inverse of :func:`frame_components`)."""
    k = jets.value(a).ndim - 1
    for i in range(k):
        letters = list("abcd"[:k])
        src = "n" + "".join(letters)
        letters[i] = "z"
        dst = "n" + "".join(letters)
        a = jets.einsum(f"n{'abcd'[i]}z,{src}->{dst}", theta, a)
    return a


def frame_star_matrix(orientation: int = 1) -> np.ndarray:
    """Hodge star on the orthonormal 2-form basis (12, 13, 14, 23, 24, 34)."""
    eps = levi_civita(4)
    S = np.zeros((6, 6))
    for P, (i, j) in enumerate(PAIRS):
        for Q, (k, l) in enumerate(PAIRS):
            S[Q, P] = orientation * eps[i, j, k, l]
    return S


def omega_basis() -> np.ndarray:
    """Rows: unit forms Omega, Phi, Psi, Omega-bar, Phi-bar, Psi-bar in the pair basis."""
    r = 1 / np.sqrt(2)
    return r * np.array(
        [
            [1, 0, 0, 0, 0, 1],
            [0, 1, 0, 0, -1, 0],
            [0, 0, 1, 1, 0, 0],
            [1, 0, 0, 0, 0, -1],
            [0, 1, 0, 0, 1, 0],
            [0, 0, 1, -1, 0, 0],
        ],
        dtype=float,
    )


def pairs_from_antisym(A: np.ndarray) -> np.ndarray:
    """``(N, 4, 4)`` antisymmetric arrays to ``(N, 6)`` pair-basis vectors."""
    return np.stack([A[:, i, j] for i, j in PAIRS], axis=-1)


def antisym_from_pairs(v: np.ndarray) -> np.ndarray:
    A = np.zeros(v.shape[:-1] + (4, 4))
    for P, (i, j) in enumerate(PAIRS):
        A[..., i, j] = v[..., P]
        A[..., j, i] = -v[..., P]
    return A


@dataclass
class ConnectionCoeffs:
    gamma: np.ndarray  # (N, 4, 4, 4), gamma[n, i, k, j] = Gamma^i_{kj}

    def antisymmetry_residual(self) -> np.ndarray:
        g = self.gamma
        return np.max(np.abs(g + np.swapaxes(g, 1, 3)), axis=(1, 2, 3))


@dataclass
class CurvatureBundle:
    """Frame-indexed curvature data at a batch of points."""

    R: np.ndarray
    orientation: int = 1
    ricci: np.ndarray = field(init=False)
    scalar: np.ndarray = field(init=False)
    operator: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ricci = np.einsum("nabca->nbc", self.R)
        self.scalar = np.einsum("naa->n", self.ricci)
        op = np.zeros(self.R.shape[:1] + (6, 6))
        for P, (i, j) in enumerate(PAIRS):
            for Q, (k, l) in enumerate(PAIRS):
                op[:, P, Q] = -self.R[:, i, j, k, l]
        self.operator = op

    @cached_property
    def star(self) -> np.ndarray:
        return frame_star_matrix(self.orientation)

    @cached_property
    def weyl_split(self) -> dict:
        """``scalar``, ``B``, ``W+``, ``W-`` parts of the curvature operator."""
        S, op = self.star, self.operator
        sos = S @ op @ S
        ident = np.eye(6)
        scal = (self.scalar / 12.0)[:, None, None] * ident
        B = 0.5 * (op - sos)
        W = 0.5 * (op + sos) - scal
        SW = S @ W
        return {"scalar": scal, "B": B, "W+": 0.5 * (W + SW), "W-": 0.5 * (W - SW)}

    def symmetry_residuals(self) -> dict:
        R = self.R
        return {
            "antisym_12": np.max(np.abs(R + np.swapaxes(R, 1, 2)), axis=(1, 2, 3, 4)),
            "antisym_34": np.max(np.abs(R + np.swapaxes(R, 3, 4)), axis=(1, 2, 3, 4)),
            "pair_sym": np.max(np.abs(R - np.transpose(R, (0, 3, 4, 1, 2))), axis=(1, 2, 3, 4)),
            "bianchi": np.max(
                np.abs(R + np.transpose(R, (0, 2, 3, 1, 4)) + np.transpose(R, (0, 3, 1, 2, 4))),
                axis=(1, 2, 3, 4),
            ),
        }

    def weyl_residuals(self) -> dict:
        w = self.weyl_split
        S = self.star
        reassembled = w["scalar"] + w["B"] + w["W+"] + w["W-"]
        return {
            "reassembly": np.max(np.abs(reassembled - self.operator), axis=(1, 2)),
            "trace_W+": np.abs(np.trace(w["W+"], axis1=1, axis2=2)),
            "trace_W-": np.abs(np.trace(w["W-"], axis1=1, axis2=2)),
            "star_W+": np.max(np.abs(S @ w["W+"] - w["W+"]), axis=(1, 2)),
            "star_W-": np.max(np.abs(S @ w["W-"] + w["W-"]), axis=(1, 2)),
            "B_anticommutes": np.max(np.abs(S @ w["B"] + w["B"] @ S), axis=(1, 2)),
        }


class FrameGeometry:
    """Lazily computed geometry of a coframe on a batch of points."""

    def __init__(self, coframe: Coframe, points):
        self.coframe = coframe
        self.points = as_points(points)

    @cached_property
    def theta(self) -> Jet:
        return self.coframe.matrix(self.points, 2)

    @cached_property
    def E(self) -> Jet:
        return FrameFields(self.coframe).jet(self.points, 2)

    @cached_property
    def metric(self) -> np.ndarray:
        th = self.theta.val
        return np.einsum("nim,nik->nmk", th, th)

    @cached_property
    def coordinate_orientation(self) -> np.ndarray:
        return self.coframe.orientation * np.sign(np.linalg.det(self.theta.val)).astype(int)

    def duality_residual(self) -> np.ndarray:
        pairing = np.einsum("nim,njm->nij", self.theta.val, self.E.val)
        return np.max(np.abs(pairing - np.eye(4)), axis=(1, 2))

    # -- brackets ---------------------------------------------------------
    @cached_property
    def bracket_coordinate(self) -> Jet:
        """``[E_a, E_b]^mu`` as an order-1 jet ``(N, 4, 4, 4)``."""
        E = self.E
        dE = E.d()  # (N, b, mu, nu), nu = derivative direction
        t = jets.einsum("nav,nbmv->nabm", E, dE)
        return t - jets.einsum("nabm->nbam", t)

    @cached_property
    def brackets(self) -> Jet:
        """Frame coefficients ``c[n, a, b, k]`` as an order-1 jet."""
        return jets.einsum("nabm,nkm->nabk", self.bracket_coordinate, self.theta)

    def lie_bracket(self, i: int, j: int) -> np.ndarray:
        """``(N, 4)`` coefficients of ``[E_i, E_j]`` in the frame (0-based indices)."""
        return self.brackets.val[:, i, j, :]

    # -- connection --------------------------------------------------------
    @cached_property
    def gamma_jet(self) -> Jet:
        """Koszul formula in an orthonormal frame:
        ``2 Gamma^i_{kj} = c_kj^i - c_ji^k + c_ik^j``."""
        c = self.brackets
        t1 = jets.einsum("nkji->nikj", c)
        t2 = jets.einsum("njik->nikj", c)
        return 0.5 * (t1 - t2 + c)

    @cached_property
    def gamma(self) -> np.ndarray:
        return self.gamma_jet.val

    def connection(self) -> ConnectionCoeffs:
        return ConnectionCoeffs(self.gamma)

    @cached_property
    def coframe_differentials(self) -> np.ndarray:
        """Frame components ``D[n, i, a, b] = d th_i (E_a, E_b)`` from coordinate
        derivatives of the coframe (independent of the frame derivatives)."""
        dth = self.theta.d().val  # (N, i, nu, mu) with mu the derivative axis
        dcoord = np.swapaxes(dth, 2, 3) - dth
        E = self.E.val
        return np.einsum("nimv,nam,nbv->niab", dcoord, E, E)

    @cached_property
    def gamma_cartan(self) -> np.ndarray:
        """Connection from the first structure equation ``d th_i = -w^i_j ^ th_j``."""
        D = self.coframe_differentials
        t1 = D
        t2 = np.einsum("nkji->nikj", D)
        t3 = np.einsum("njik->nikj", D)
        return 0.5 * (-t1 + t2 - t3)

    def torsion_residual(self) -> np.ndarray:
        g, c = self.gamma, self.brackets.val
        # nabla_{E_a} E_b - nabla_{E_b} E_a - [E_a, E_b]
        t = np.einsum("nmab->nabm", g) - np.einsum("nmba->nabm", g) - c
        return np.max(np.abs(t), axis=(1, 2, 3))

    def directional(self, a: Jet) -> np.ndarray:
        """``E_k`` applied to a jet: result has a new axis 1 indexing k."""
        grad = a.grad  # (4, N, ...)
        return np.einsum("nkm,mn...->nk...", self.E.val, grad)

    # -- curvature ---------------------------------------------------------
    @cached_property
    def riemann(self) -> np.ndarray:
        G = self.gamma
        c = self.brackets.val
        DG = self.directional(self.gamma_jet)  # DG[n, a, m, b, c] = E_a(Gamma^m_{bc})
        R = (
            np.einsum("nambc->nabcm", DG)
            - np.einsum("nbmac->nabcm", DG)
            + np.einsum("nibc,nmai->nabcm", G, G)
            - np.einsum("niac,nmbi->nabcm", G, G)
            - np.einsum("nabk,nmkc->nabcm", c, G)
        )
        return R

    def curvature(self) -> CurvatureBundle:
        return CurvatureBundle(self.riemann, self.coframe.orientation)


def curvature(coframe: Coframe, points) -> CurvatureBundle:
    return FrameGeometry(coframe, points).curvature()


@dataclass
class RicciEigen:
    eigenvalues: np.ndarray  # (N, 4) ascending
    off_diagonal: np.ndarray  # (N,)


def ricci_eigenstructure(C: CurvatureBundle) -> RicciEigen:
    rho = 0.5 * (C.ricci + np.swapaxes(C.ricci, 1, 2))
    off = rho - np.einsum("nii->ni", rho)[:, :, None] * np.eye(4)
    return RicciEigen(np.linalg.eigvalsh(rho), np.max(np.abs(off), axis=(1, 2)))


def lie_derivative_metric(geo: FrameGeometry, axis: int, frame_indices: Sequence[int] = (0, 1)) -> np.ndarray:
    """``(L_V g)(E_a, E_b)`` for the coordinate field ``V = d_axis``, restricted
    to the listed frame vectors."""
    dE = geo.E.d().val[..., axis]  # (N, a, mu): d_axis E_a^mu
    C = np.einsum("nam,nbm->nab", dE, geo.theta.val)  # th_b([V, E_a])
    idx = np.asarray(frame_indices)
    C = C[:, idx][:, :, idx]
    return -(C + np.swapaxes(C, 1, 2))
