"""Finite-difference solver for the profile equations ``Δu = c1 h² + c2 e^{2u}``.

The unknown is ``u = ln H`` on a uniform rectangle grid with Dirichlet data.
The discrete operator is the 5-point Laplacian.  With ``c2 = 0`` the system
is linear and solved in one sparse factorization; otherwise damped Newton
with Armijo backtracking on the residual max-norm is used.

Node values are stored as an ``(nx, ny)`` array indexed ``values[i, j]`` at
``(xs[i], ys[j])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from . import fields as F
from .fields import GridField, ScalarField

MIN_NODES = 9


class SolverError(RuntimeError):
    """Base class for solver failures; carries the residual history."""

    def __init__(self, message: str, history=()):
        super().__init__(message)
        self.history = list(history)


class NonConvergenceError(SolverError):
    pass


class BlowUpError(SolverError):
    pass


@dataclass(frozen=True)
class Grid2D:
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.nx < MIN_NODES or self.ny < MIN_NODES:
            raise ValueError(f"grid needs at least {MIN_NODES} nodes per axis, got {self.nx}x{self.ny}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("grid rectangle is empty")
        if self.values is not None:
            v = np.asarray(self.values, float)
            if v.shape != (self.nx, self.ny):
                raise ValueError(f"values shape {v.shape} != ({self.nx}, {self.ny})")
            object.__setattr__(self, "values", v)

    @classmethod
    def square(cls, n: int = 129, lo: float = -1.0, hi: float = 1.0) -> "Grid2D":
        return cls(lo, hi, lo, hi, n, n)

    @property
    def xs(self):
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y0, self.y1, self.ny)

    @property
    def spacing(self):
        return (self.x1 - self.x0) / (self.nx - 1), (self.y1 - self.y0) / (self.ny - 1)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def with_values(self, values) -> "Grid2D":
        return replace(self, values=np.asarray(values, float))

    def boundary_mask(self):
        m = np.zeros((self.nx, self.ny), bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m


BoundaryData = ScalarField | Callable[[np.ndarray, np.ndarray], np.ndarray]


def _eval_xy(f, X, Y) -> np.ndarray:
    """Evaluate a ScalarField (at z = t = 0) or a plain ``f(x, y)`` callable on a mesh."""
    if isinstance(f, ScalarField):
        pts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size), np.zeros(X.size)], axis=1)
        return f(pts).reshape(X.shape)
    return np.broadcast_to(np.asarray(f(X, Y), float), X.shape).copy()


def _coerce(f):
    if isinstance(f, (int, float)):
        return F.Const(f)
    if isinstance(f, str):
        return F.parse(f)
    return f


@dataclass
class ProfileBVP:
    """``Δu = c1 h² + c2 e^{2u}`` with ``u = boundary`` on the rectangle edge."""

    c1: float
    c2: float
    h: BoundaryData
    boundary: BoundaryData
    initial: BoundaryData | None = None
    u_cap: float = 50.0

    @classmethod
    def for_family(cls, family: str, h, boundary, **kw) -> "ProfileBVP":
        from .families import PDE_COEFFS, Family

        c1, c2 = PDE_COEFFS[Family(family)]
        return cls(c1, c2, h, boundary, **kw)

    def __post_init__(self):
        self.h = _coerce(self.h)
        self.boundary = _coerce(self.boundary)
        if self.initial is not None:
            self.initial = _coerce(self.initial)


@dataclass
class SolveResult:
    grid: Grid2D
    history: list = field(default_factory=list)
    iterations: int = 0
    residual: float = math.nan

    @property
    def u(self) -> np.ndarray:
        return self.grid.values


def _laplacian(nx, ny, hx, hy):
    """5-point Laplacian on interior unknowns, ordered ``i * (ny-2) + j``."""
    def lap1(n, h):
        main = -2.0 * np.ones(n)
        off = np.ones(n - 1)
        return sp.diags([off, main, off], [-1, 0, 1]) / (h * h)

    mx, my = nx - 2, ny - 2
    return (sp.kron(lap1(mx, hx), sp.identity(my)) + sp.kron(sp.identity(mx), lap1(my, hy))).tocsc()


def discrete_laplacian(u: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """5-point Laplacian of node values at interior nodes."""
    return (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hx**2 + (
        u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]
    ) / hy**2


def discrete_residual(bvp: ProfileBVP, grid: Grid2D, u: np.ndarray, h2: np.ndarray | None = None) -> np.ndarray:
    hx, hy = grid.spacing
    if h2 is None:
        X, Y = grid.mesh()
        h2 = _eval_xy(bvp.h, X, Y)[1:-1, 1:-1] ** 2
    inner = u[1:-1, 1:-1]
    return discrete_laplacian(u, hx, hy) - bvp.c1 * h2 - bvp.c2 * np.exp(2 * inner)


def solve(bvp: ProfileBVP, grid: Grid2D, tol: float = 1e-9, max_iter: int = 50,
          stagnation_window: int = 10) -> SolveResult:
    """Solve the discrete profile equation; raises on stagnation or blow-up."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    X, Y = grid.mesh()
    hvals = _eval_xy(bvp.h, X, Y)
    if np.any(~(hvals > 0)):
        raise ValueError("h must be positive on the closed rectangle")
    bvals = _eval_xy(bvp.boundary, X, Y)
    mask = grid.boundary_mask()
    if not np.all(np.isfinite(bvals[mask])):
        raise ValueError("boundary data is not finite")

    u = _eval_xy(bvp.initial, X, Y) if bvp.initial is not None else bvals.copy()
    u[mask] = bvals[mask]
    if bvp.c2 != 0.0 and np.max(u) > bvp.u_cap:
        raise BlowUpError(f"initial iterate exceeds u cap {bvp.u_cap}")
    h2 = hvals[1:-1, 1:-1] ** 2
    hx, hy = grid.spacing
    L = _laplacian(grid.nx, grid.ny, hx, hy)
    shape = (grid.nx - 2, grid.ny - 2)

    def res(v):
        return discrete_residual(bvp, grid, v, h2)

    r = res(u)
    history = [float(np.abs(r).max())]

    if bvp.c2 == 0.0:
        # linear: one correction step solves exactly
        u[1:-1, 1:-1] += spsolve(L, -r.ravel()).reshape(shape)
        r = res(u)
        history.append(float(np.abs(r).max()))
        if history[-1] > tol:
            raise NonConvergenceError(f"linear solve residual {history[-1]:.3e} above tol {tol:.1e}", history)
        return SolveResult(grid.with_values(u), history, 1, history[-1])

    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"no convergence in {max_iter} Newton iterations", history)
        if it >= stagnation_window and history[-1] > 0.99 * history[-1 - stagnation_window]:
            raise NonConvergenceError(
                f"Newton stagnated: residual reduced by <1% over {stagnation_window} iterations", history)
        inner = u[1:-1, 1:-1]
        J = L - sp.diags(2.0 * bvp.c2 * np.exp(2 * inner).ravel())
        step = spsolve(J.tocsc(), -r.ravel()).reshape(shape)
        lam, accepted = 1.0, False
        while lam >= 2.0**-20:
            trial = u.copy()
            trial[1:-1, 1:-1] += lam * step
            if np.max(trial) > bvp.u_cap:
                raise BlowUpError(f"iterate exceeded u cap {bvp.u_cap}", history)
            with np.errstate(over="ignore", invalid="ignore"):
                rt = res(trial)
            norm = float(np.abs(rt).max())
            # Armijo condition on the max-norm
            if np.isfinite(norm) and norm <= (1 - 1e-4 * lam) * history[-1]:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise NonConvergenceError("line search failed to reduce the residual", history)
        u, r = trial, rt
        history.append(norm)
        it += 1
    return SolveResult(grid.with_values(u), history, it, history[-1])


def export_field(sol: Grid2D | SolveResult, name: str = "u") -> GridField:
    """Quintic spline interpolant of the node values of ``u``."""
    g = sol.grid if isinstance(sol, SolveResult) else sol
    if g.values is None:
        raise ValueError("grid has no values")
    return GridField.from_nodes(g.xs, g.ys, g.values, name=name)


def export_H(sol: Grid2D | SolveResult) -> ScalarField:
    """``H = e^u`` as a field whose ``ln`` is recognised as the spline itself."""
    return F.exp(export_field(sol))


# -- grid files ------------------------------------------------------------

def write_grid(grid: Grid2D, path) -> None:
    if grid.values is None:
        raise ValueError("grid has no values")
    with open(path, "w") as fh:
        fh.write(f"{grid.x0!r} {grid.x1!r} {grid.y0!r} {grid.y1!r} {grid.nx} {grid.ny}\n")
        np.savetxt(fh, grid.values, fmt="%.17g")


def read_grid(path) -> Grid2D:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6:
            raise ValueError(f"{path}: header must be 'x0 x1 y0 y1 nx ny'")
        x0, x1, y0, y1 = (float(v) for v in header[:4])
        nx, ny = int(header[4]), int(header[5])
        data = np.loadtxt(fh, ndmin=1).ravel()
    if data.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {data.size}")
    return Grid2D(x0, x1, y0, y1, nx, ny, data.reshape(nx, ny))


# -- 1D reference profile by shooting -----------------------------------------

@dataclass(frozen=True)
class ShootingProfile:
    """Solution of ``u'' = c1 h0² + c2 e^{2u}`` on ``[a, b]`` with given end values."""

    a: float
    b: float
    slope: float
    sol: object

    def _eval(self, x, k):
        x = np.asarray(x, float)
        return self.sol.sol(x.ravel())[k].reshape(x.shape)

    def __call__(self, x):
        return self._eval(x, 0)

    def derivative(self, x):
        return self._eval(x, 1)

    def as_boundary(self):
        """Boundary data ``(x, y) -> u(x)``."""
        return lambda X, Y: self(X)


def shoot_profile(c1: float, c2: float, h0: float, a: float, b: float, ua: float, ub: float,
                  slope_bracket=(-20.0, 20.0), rtol=1e-12, atol=1e-13) -> ShootingProfile:
    """Shooting on the initial slope with a DOP853 integrator and Brent root finding."""
    def rhs(_, y):
        return [y[1], c1 * h0 * h0 + c2 * math.exp(min(2 * y[0], 700.0))]

    def blow(_, y):
        return 50.0 - y[0]

    blow.terminal = True

    def integrate(s):
        return solve_ivp(rhs, (a, b), [ua, s], method="DOP853", rtol=rtol, atol=atol,
                         dense_output=True, events=blow)

    def miss(s):
        sol = integrate(s)
        if sol.status == 1:
            return 1e3
        return sol.y[0, -1] - ub

    lo, hi = slope_bracket
    s = brentq(miss, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    return ShootingProfile(a, b, s, integrate(s))
