import math

import numpy as np
import pytest

from qchlab import fields as F
from qchlab.solver import (BlowUpError, Grid2D, NonConvergenceError, ProfileBVP, discrete_residual, export_field,
                           export_H, read_grid, shoot_profile, solve, write_grid)


def quadratic(X, Y):
    return (X**2 + Y**2) / 2


def manufactured_error(n):
    grid = Grid2D(0.0, 1.0, 0.0, 1.0, n, n)
    res = solve(ProfileBVP(2.0, 0.0, 1.0, quadratic), grid)
    X, Y = grid.mesh()
    return np.max(np.abs(res.u - quadratic(X, Y))), res


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D.square(8)
    with pytest.raises(ValueError):
        Grid2D(1, 0, 0, 1, 9, 9)
    with pytest.raises(ValueError):
        Grid2D(0, 1, 0, 1, 9, 9, np.zeros((9, 10)))


def test_quadratic_is_reproduced_to_roundoff():
    err, _ = manufactured_error(129)
    assert err <= 1e-10


def exp_error(n):
    # u = e^{x+y}/2 has Delta u = e^{x+y} = 2 h^2 with h^2 = e^{x+y}/2
    grid = Grid2D(0.0, 1.0, 0.0, 1.0, n, n)
    u = lambda X, Y: np.exp(X + Y) / 2
    res = solve(ProfileBVP(2.0, 0.0, "sqrt(exp(x+y)/2)", u), grid)
    return np.max(np.abs(res.u - u(*grid.mesh())))


def test_second_order_convergence():
    errs = [exp_error(n) for n in (33, 65, 129)]
    assert errs[-1] <= 1e-4
    for a, b in zip(errs, errs[1:]):
        assert a / b >= 3.5


def test_residual_meets_tolerance():
    _, res = manufactured_error(65)
    assert res.residual <= 1e-9
    assert np.max(np.abs(discrete_residual(ProfileBVP(2.0, 0.0, 1.0, quadratic), res.grid, res.u))) <= 1e-9


def test_equilibrium_of_second_profile_equation():
    c = math.log(1 / math.sqrt(2))
    res = solve(ProfileBVP.for_family("thm2", 1.0, c), Grid2D.square(33))
    assert np.max(np.abs(res.u - c)) <= 1e-12
    assert res.residual <= 1e-12
    H = export_H(res)
    p = np.random.default_rng(0).uniform(-0.9, 0.9, (10, 4))
    assert np.allclose(H(p), 1 / math.sqrt(2), atol=1e-12)


def test_maximum_principle():
    res = solve(ProfileBVP(2.0, 0.0, "1 + x^2", 0.3), Grid2D.square(41))
    mask = res.grid.boundary_mask()
    assert np.max(res.u[~mask]) <= np.max(res.u[mask]) + 1e-10


def test_newton_history_monotone_and_matches_ode_oracle():
    prof = shoot_profile(0.5, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0)
    res = solve(ProfileBVP.for_family("thm3", 1.0, prof.as_boundary(), initial=0.0), Grid2D.square(129))
    h = res.history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert res.iterations <= 25
    X, _ = res.grid.mesh()
    assert np.max(np.abs(res.u - prof(X))) <= 1e-5


def test_shooting_oracle_satisfies_ode():
    prof = shoot_profile(0.5, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0)
    x = np.linspace(-1, 1, 201)
    assert prof(np.array(-1.0)) == pytest.approx(-1.0, abs=1e-10)
    assert prof(np.array(1.0)) == pytest.approx(-1.0, abs=1e-10)
    h = 1e-4
    upp = (prof(x[1:-1] + h) - 2 * prof(x[1:-1]) + prof(x[1:-1] - h)) / h**2
    assert np.allclose(upp, 0.5 + np.exp(2 * prof(x[1:-1])), atol=1e-4)


def test_blow_up_detected():
    with pytest.raises(BlowUpError, match="cap"):
        solve(ProfileBVP(0.5, 1.0, 1.0, 0.0, initial=6.0, u_cap=5.0), Grid2D.square(17))
    with pytest.raises(BlowUpError):
        solve(ProfileBVP(0.5, 1.0, 1.0, 6.0, u_cap=5.0), Grid2D.square(17))


def test_non_convergence_carries_history():
    with pytest.raises(NonConvergenceError) as ei:
        solve(ProfileBVP.for_family("thm3", 1.0, -1.0, initial=0.0), Grid2D.square(33), max_iter=1)
    assert len(ei.value.history) >= 1


def test_rejects_nonpositive_h_and_bad_tol():
    with pytest.raises(ValueError):
        solve(ProfileBVP(2.0, 0.0, "x", 0.0), Grid2D.square(9))
    with pytest.raises(ValueError):
        solve(ProfileBVP(2.0, 0.0, 1.0, 0.0), Grid2D.square(9), tol=0)


def test_export_constant_and_quadratic():
    g = Grid2D.square(17).with_values(np.full((17, 17), 0.7))
    f = export_field(g)
    j = f.jet(np.random.default_rng(1).uniform(-0.9, 0.9, (10, 4)))
    assert np.allclose(j.val, 0.7) and np.max(np.abs(j.grad)) <= 1e-12 and np.max(np.abs(j.hess)) <= 1e-10
    _, res = manufactured_error(65)
    q = export_field(res)
    X, Y = res.grid.mesh()
    P = np.stack([X.ravel(), Y.ravel(), 0 * X.ravel(), 0 * X.ravel()], 1)
    assert np.allclose(q(P), res.u.ravel(), atol=1e-13)
    inner = np.random.default_rng(2).uniform(0.1, 0.9, (30, 4))
    assert np.max(np.abs(q.jet(inner).hess[0, 0] - 1)) <= 1e-4


def test_grid_file_round_trip(tmp_path):
    _, res = manufactured_error(17)
    path = tmp_path / "u.grid"
    write_grid(res.grid, path)
    back = read_grid(path)
    assert np.array_equal(back.values, res.u)
    assert (back.x0, back.x1, back.nx, back.ny) == (0.0, 1.0, 17, 17)
    path.write_text("0 1 0 1 9\n")
    with pytest.raises(ValueError):
        read_grid(path)
