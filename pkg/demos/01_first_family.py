"""Walk through the first family with h = 1 and ln H = (x^2 + y^2)/2.

Builds the coframe, reads off the frame, and evaluates the quantities that
make it a semi-symmetric QCH Kaehler surface with a non-lcK Hermitian J.
"""

import math

import numpy as np

from qchlab import FamilySpec, build
from qchlab.hermitian import HermitianPack, lck_certificate, qch_fit

geo_data = build(FamilySpec("thm1", "1", "exp((x^2+y^2)/2)"))
pts = np.array([[0.3, -0.4, -2.0, 1.0], [1.0, 0.0, -1.0, math.pi], [-0.7, 0.8, -0.6, 5.0]])
geo = geo_data.geometry(pts)

print("frame vectors at the first point (rows E1..E4, columns d_x d_y d_z d_t):")
print(np.array2string(geo.E.val[0], precision=4, suppress_small=True))

J = HermitianPack(geo, geo_data.J)
Jbar = HermitianPack(geo, geo_data.Jbar)
C = geo.curvature()
z = pts[:, 2]

print("\nLee form of J in the frame:", np.round(J.lee, 12).tolist())
print("expected -alpha th4 with alpha = -2/z:", (2 / z).tolist())
print("scalar curvature:", C.scalar, " -8/z^2:", -8 / z**2)
print("conformal scalar curvature kappa:", J.kappa)
print("Nijenhuis of J and J-bar:", J.nijenhuis().max(), Jbar.nijenhuis().max())
print("|nabla Omega-bar| (Kaehler):", np.abs(Jbar.nabla_omega).max())
print("R(., .)E3 and R(., .)E4:", np.abs(C.R[:, :, :, 2:, :]).max())

for i, p in enumerate(pts):
    fit = qch_fit(C.R[i], geo_data.Jbar, n_samples=40, seed=i)
    a, b, c = fit.coeffs
    print(f"QCH fit at z={p[2]:+.1f}: a={a:+.4f} b={b:+.4f} c={c:+.4f}  residual {fit.residual:.1e}")

cert = lck_certificate(J)
print(f"\nl.c.K. certificate: {cert.verdict.value}, max |d theta| = {cert.max_d_lee:.3f}, "
      f"self-dual part {cert.sd_residual:.1e}")
