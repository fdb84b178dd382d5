import math

import numpy as np
import pytest

from qchlab import families as fam
from qchlab.harness import DEFAULT_TOLERANCES
from qchlab.suites import Context

THM1_H = "exp((x^2+y^2)/2)"


def box_points(box, n, seed):
    rng = np.random.default_rng(seed)
    return np.stack([rng.uniform(*box[k], n) for k in "xyzt"], axis=1)


@pytest.fixture(scope="session")
def thm1():
    return fam.build(fam.FamilySpec("thm1", "1", THM1_H))


@pytest.fixture(scope="session")
def thm2():
    return fam.build(fam.FamilySpec("thm2", "1", "1/sqrt(2)"))


@pytest.fixture(scope="session")
def thm3_closed():
    # closed-form data for the third family: ln H = x^2 + y^2 on a small square,
    # h chosen so that Delta ln H = h^2/2 + H^2 holds identically
    box = {"x": (-0.5, 0.5), "y": (-0.5, 0.5)}
    spec = fam.FamilySpec("thm3", "sqrt(2*(4 - exp(2*(x^2+y^2))))", "exp(x^2+y^2)", box)
    return fam.build(spec), spec.box


@pytest.fixture(scope="session")
def thm1_points():
    return box_points(fam.DEFAULT_BOX[fam.Family.THM1], 40, 11)


@pytest.fixture(scope="session")
def thm2_points():
    return box_points(fam.DEFAULT_BOX[fam.Family.THM2], 40, 12)


@pytest.fixture(scope="session")
def thm1_ctx(thm1, thm1_points):
    return Context(thm1.coframe, thm1_points, DEFAULT_TOLERANCES, thm1, "thm1")


@pytest.fixture(scope="session")
def thm2_ctx(thm2, thm2_points):
    return Context(thm2.coframe, thm2_points, DEFAULT_TOLERANCES, thm2, "thm2")


@pytest.fixture(scope="session")
def thm3_ctx(thm3_closed):
    g, box = thm3_closed
    return Context(g.coframe, box_points(box, 40, 13), DEFAULT_TOLERANCES, g, "thm3")
