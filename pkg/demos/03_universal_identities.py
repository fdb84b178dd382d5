"""Identities that hold for any orthonormal coframe and orthogonal J.

Random coframes are built from trigonometric and quadratic perturbations of
the identity; none of them is Hermitian, yet the curvature identities and
the Gray-Hervella relation hold to rounding.
"""

import numpy as np

from qchlab import FrameComplexStructure, FrameGeometry
from qchlab.families import random_coframe
from qchlab.hermitian import HermitianPack

pts = np.random.default_rng(1).uniform(-1, 1, (40, 4))
print(f"{'seed':>4} {'Bianchi':>9} {'pair sym':>9} {'Koszul-Cartan':>14} {'Gray-Hervella':>14} {'Nijenhuis':>10}")
for seed in range(8):
    geo = FrameGeometry(random_coframe(seed), pts)
    sym = geo.curvature().symmetry_residuals()
    pk = HermitianPack(geo, FrameComplexStructure.standard())
    print(f"{seed:4d} {sym['bianchi'].max():9.1e} {sym['pair_sym'].max():9.1e} "
          f"{np.abs(geo.gamma - geo.gamma_cartan).max():14.1e} {pk.gray_hervella_residual().max():14.1e} "
          f"{pk.nijenhuis().max():10.3f}")
