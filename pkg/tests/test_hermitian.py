import math

import numpy as np
import pytest

from qchlab import fields as F
from qchlab.families import FamilySpec, build, frame_coefficients, random_coframe
from qchlab.forms import KForm, codifferential_form, sd_asd_split, wedge
from qchlab.frame import Coframe, FrameGeometry, euclidean_coframe
from qchlab.hermitian import (DegenerateStructureError, FrameComplexStructure, HermitianPack, Verdict,
                              conformal_foliation_residual, coordinate_dtheta, generators_in_nullity, kaehler_form,
                              lck_certificate, nabla_omega, qch_fit, semi_symmetry_certificate, _holomorphic_curvature)

J = FrameComplexStructure.standard()
JBAR = FrameComplexStructure.opposite()
P = np.random.default_rng(31).uniform(-1, 1, (12, 4))


def pack(g, pts, S=None):
    return HermitianPack(g.geometry(pts), S or g.J)


def test_structures_square_to_minus_identity():
    for S in (J, JBAR):
        assert np.allclose(S.matrix @ S.matrix, -np.eye(4))
    assert J.orientation == 1 and JBAR.orientation == -1
    with pytest.raises(ValueError):
        FrameComplexStructure(np.eye(4))


def test_euclidean_kaehler_form():
    om = kaehler_form(J, euclidean_coframe())(P)
    want = np.zeros((4, 4))
    want[0, 1], want[1, 0], want[2, 3], want[3, 2] = 1, -1, 1, -1
    assert np.array_equal(om, np.broadcast_to(want, om.shape))


def test_opposite_kaehler_form_first_family(thm1, thm1_points):
    th = thm1.coframe.forms
    h2 = thm1.h(thm1_points) ** 2
    z = thm1_points[:, 2]
    omega_sigma = KForm(2, {(0, 1): F.ONE})(thm1_points) * h2[:, None, None]
    want = z[:, None, None] ** 2 * omega_sigma + wedge(th[3], th[2])(thm1_points)
    assert np.allclose(kaehler_form(JBAR, thm1.coframe)(thm1_points), want, atol=1e-12)


def test_euclidean_structure_is_degenerate_and_flat():
    pk = HermitianPack(FrameGeometry(euclidean_coframe(), P), J)
    assert np.max(np.abs(pk.lee)) == 0
    with pytest.raises(DegenerateStructureError, match="nullity"):
        pk.alpha
    assert np.max(np.abs(pk.ricci_star)) == 0
    assert np.max(pk.nijenhuis()) == 0
    assert all(np.max(v) == 0 for v in pk.gray_residuals().values())
    assert np.max(pk.j_invariance_residual()["j_invariance"]) == 0
    cert = semi_symmetry_certificate(pk.curvature, pk.kappa)
    assert cert.verdict is Verdict.SEMI_SYMMETRIC


def test_kaehler_opposite_structure_has_no_lee_form(thm2, thm2_points):
    pk = pack(thm2, thm2_points, JBAR)
    assert np.max(np.abs(pk.lee)) <= 1e-12
    with pytest.raises(DegenerateStructureError):
        pk.alpha
    assert np.allclose(pk.kappa, pk.curvature.scalar, atol=1e-10)
    assert np.max(pk.nijenhuis()) <= 1e-8
    assert lck_certificate(pk).verdict is Verdict.INCONCLUSIVE


def test_kaehler_form_closed_for_opposite_structure(thm1_ctx, thm2_ctx, thm3_ctx):
    for ctx in (thm1_ctx, thm2_ctx, thm3_ctx):
        assert np.max(np.abs(ctx.pack_bar.d_omega_frame())) <= 1e-8


@pytest.mark.parametrize("ctx", ["thm1_ctx", "thm2_ctx", "thm3_ctx"])
def test_two_term_structure_of_nabla_omega(ctx, request):
    c = request.getfixturevalue(ctx)
    no = nabla_omega(c.pack)
    alpha = np.abs(c.construction.alpha(c.points))
    assert np.allclose(no.alpha, alpha, rtol=1e-10)
    assert np.max(no.structure_residual) <= 1e-8
    assert np.max(no.delta_residual) <= 1e-8
    assert np.max(no.lee_residual) <= 1e-8
    assert np.max(c.pack.lee_identity_residual()) <= 1e-8


def test_lee_form_first_family_at_z_minus_two(thm1):
    pts = np.array([[0.2, -0.4, -2.0, 1.0], [0.9, 0.1, -2.0, 5.0]])
    lee = pack(thm1, pts).lee
    assert np.allclose(lee, [[0, 0, 0, -1]] * 2, atol=1e-13)


def test_lee_form_third_family_is_coth_theta4(thm3_ctx):
    z = thm3_ctx.points[:, 2]
    assert np.allclose(thm3_ctx.pack.lee[:, 3], 1 / np.tanh(z / 2), rtol=1e-12)
    assert np.allclose(thm3_ctx.pack.lee[:, :3], 0, atol=1e-12)


def test_codifferential_of_omega_and_lee(thm1, thm1_points):
    pts = thm1_points
    o = int(thm1.coframe.coordinate_orientation(pts)[0])
    dOm = codifferential_form(kaehler_form(J, thm1.coframe), pts, thm1.coframe.metric, o)
    alpha = thm1.alpha(pts)
    th3 = thm1.coframe.forms[2](pts)
    assert np.allclose(dOm, -2 * alpha[:, None] * th3, atol=1e-10)
    pk = pack(thm1, pts)
    assert np.allclose(pk.delta_lee, -alpha**2, atol=1e-10)
    assert np.allclose(pk.delta_lee_frame, pk.delta_lee, atol=1e-10)
    assert np.allclose(pk.delta_lee, -pk.lee_norm2, atol=1e-10)


def test_dtheta_self_dual_in_opposite_orientation(thm1, thm1_points):
    pk = pack(thm1, thm1_points)
    g = thm1.coframe.metric(thm1_points, 0).val
    o = JBAR.orientation * int(thm1.coframe.coordinate_orientation(thm1_points)[0])
    sp = sd_asd_split(coordinate_dtheta(pk), g, o)
    assert np.max(np.abs(sp.asd)) <= 1e-10
    assert np.max(np.abs(sp.sd)) > 1e-3


def test_nijenhuis_vanishes_for_both_structures(thm1, thm2, thm1_points, thm2_points):
    assert np.max(pack(thm1, thm1_points).nijenhuis()) <= 1e-8
    assert np.max(pack(thm2, thm2_points, JBAR).nijenhuis()) <= 1e-8


def test_first_family_ricci_star_and_kappa(thm1, thm1_points):
    pk = pack(thm1, thm1_points)
    assert np.max(np.abs(pk.ricci_star - pk.curvature.ricci)) <= 1e-8
    assert np.allclose(pk.kappa, pk.curvature.scalar, atol=1e-8)
    pk2 = pack(thm1, np.array([[0.3, 0.2, -2.0, 1.0]]))
    assert pk2.kappa[0] == pytest.approx(-2.0, abs=1e-10)
    assert pk2.curvature.scalar[0] == pytest.approx(-2.0, abs=1e-10)


def test_second_family_kappa_differs_from_tau(thm2_ctx):
    d = thm2_ctx.pack.curvature.scalar - thm2_ctx.pack.kappa
    assert np.max(np.abs(d)) > 0.01
    assert np.allclose(d, 6.0, atol=1e-8)


def test_gray_conditions(thm1_ctx, thm2_ctx):
    g1 = thm1_ctx.pack.gray_residuals()
    assert max(np.max(v) for v in g1.values()) <= 1e-8
    g2 = thm2_ctx.pack.gray_residuals()
    assert np.max(g2["G2"]) <= 1e-8 and np.max(g2["G3"]) <= 1e-8
    assert np.max(g2["G1"]) > 0.01


def test_ricci_j_invariance(thm1_ctx, thm2_ctx):
    for ctx in (thm1_ctx, thm2_ctx):
        r = ctx.pack.j_invariance_residual()
        assert np.max(r["j_invariance"]) <= 1e-8
        assert np.max(r["criterion"]) <= 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gray_hervella_identity_on_generic_coframes(seed):
    c = random_coframe(seed)
    pts = np.random.default_rng(seed).uniform(-1, 1, (10, 4))
    for S in (J, JBAR):
        pk = HermitianPack(FrameGeometry(c, pts), S)
        assert np.max(pk.gray_hervella_residual()) <= 1e-8
        assert np.max(pk.nijenhuis()) > 1e-3  # a generic structure is not integrable


def test_lck_certificate_first_family(thm1):
    pts = np.array([[1.0, 0.0, -1.5, math.pi], [1.0, 0.5, -2.5, math.pi]])
    pk = pack(thm1, pts)
    cert = lck_certificate(pk)
    assert cert.verdict is Verdict.NOT_LCK and cert.max_d_lee > 1e-3
    assert cert.sd_residual <= 1e-10 and cert.structure_residual <= 1e-10
    geo = pk.geo
    k, l, m, n = frame_coefficients(geo)
    z = pts[:, 2]
    dln = geo.directional(thm1.alpha.jet(pts, 1)) / thm1.alpha(pts)[:, None]
    assert np.allclose(dln[:, 0], -k.val / z, atol=1e-12)
    assert np.allclose(dln[:, 1], -m.val / z, atol=1e-12)


def test_qch_fit_reproduces_endpoints(thm2_ctx):
    R = thm2_ctx.curv.R[0]
    fit = qch_fit(R, JBAR, n_samples=40, seed=3)
    a, b, c = fit.coeffs
    e1, e3 = np.eye(4)[[0]], np.eye(4)[[2]]
    assert _holomorphic_curvature(R, JBAR.matrix, e1)[0] == pytest.approx(a, abs=1e-8)
    assert _holomorphic_curvature(R, JBAR.matrix, e3)[0] == pytest.approx(a + b + c, abs=1e-8)


def test_qch_residual_small_on_second_family(thm2_ctx):
    for i in range(20):
        assert qch_fit(thm2_ctx.curv.R[i], JBAR, 40, seed=i).residual <= 1e-6


def test_qch_fit_needs_enough_samples():
    with pytest.raises(ValueError):
        qch_fit(np.zeros((4, 4, 4, 4)), JBAR, n_samples=5)


def test_semi_symmetry_certificates(thm1_ctx, thm2_ctx):
    c1 = semi_symmetry_certificate(thm1_ctx.curv, thm1_ctx.pack.kappa)
    assert c1.verdict is Verdict.SEMI_SYMMETRIC
    assert max(c1.max_R_E3, c1.max_R_E4, c1.max_zero_defect) <= 1e-8
    c2 = semi_symmetry_certificate(thm2_ctx.curv, thm2_ctx.pack.kappa)
    assert c2.verdict is Verdict.NOT_SEMI_SYMMETRIC


def test_conformal_foliation(thm2, thm2_points, thm1, thm1_points):
    prod = FrameGeometry(euclidean_coframe(), P)
    assert np.max(conformal_foliation_residual(prod)) == 0
    geo = thm2.geometry(thm2_points)
    assert np.max(conformal_foliation_residual(geo)) <= 1e-8
    assert np.max(generators_in_nullity(geo)) <= 1e-12
    G = thm1.geometry(thm1_points).gamma
    for i, k, j in [(3, 1, 1), (3, 2, 2), (3, 4, 4), (4, 2, 1), (4, 1, 2)]:
        assert np.max(np.abs(G[:, i - 1, k - 1, j - 1])) <= 1e-10
