"""Configuration, deterministic sampling, suite orchestration and reporting."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from . import fields as F
from . import solver as S
from .families import DEFAULT_BOX, SINGULAR_DISTANCE, Family, FamilySpec, build, custom_coframe, random_coframe
from .fields import Point4
from .suites import REGISTRY, Context, Outcome, resolve

log = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    "closed_form": 1e-8,
    "grid": 1e-4,
    "qch": 1e-6,
    "dd_zero": 1e-10,
    "hodge": 1e-12,
    "metric": 1e-10,
    "alpha_law": 1e-12,
    "lck_floor": 1e-3,
    "semi_symmetry_floor": 1e-2,
}
SAMPLE_MARGIN = 0.05


class ConfigError(ValueError):
    pass


class SamplingError(ValueError):
    pass


@dataclass
class Config:
    family: Family
    h: str = "1"
    H: dict = field(default_factory=dict)
    box: dict = field(default_factory=dict)
    samples: int = 100
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)
    report_path: str | None = None
    coframe: object = None  # custom family: rows of expressions or {"random": seed}
    margin: float = SAMPLE_MARGIN
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        try:
            self.family = Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown family {self.family!r}") from None
        if not isinstance(self.samples, int) or self.samples < 0:
            raise ConfigError("samples must be a nonnegative integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
        self.tolerances = {**DEFAULT_TOLERANCES, **self.tolerances}
        if any(not (v > 0) for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        box = dict(DEFAULT_BOX[self.family])
        for k, v in (self.box or {}).items():
            if k not in "xyzt" or len(k) != 1:
                raise ConfigError(f"unknown box axis {k!r}")
            lo, hi = (float(b) for b in v)
            if not lo < hi:
                raise ConfigError(f"box range for {k} is empty")
            box[k] = (lo, hi)
        self.box = box
        if isinstance(self.suites, str):
            self.suites = [s for s in self.suites.split(",") if s.strip()]
        if self.family is Family.CUSTOM:
            if self.coframe is None:
                raise ConfigError("custom family needs a 'coframe' entry")
        elif not self.H:
            raise ConfigError("config needs an 'H' entry with one of expr, grid_path, solve")
        elif len(set(self.H) & {"expr", "grid_path", "solve"}) != 1:
            raise ConfigError("'H' must have exactly one of expr, grid_path, solve")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "Config":
        known = {"family", "h", "H", "box", "samples", "seed", "tolerances", "suites", "report_path", "coframe", "margin"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "family" not in d:
            raise ConfigError("config needs a 'family'")
        kw = dict(d)
        if base_dir is not None:
            kw["base_dir"] = Path(base_dir)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(d, base_dir=path.parent)

    def resolve_path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


# -- sampling ---------------------------------------------------------------

def sample_array(box: dict, seed: int, n: int, singular=None, margin: float = SAMPLE_MARGIN,
                 max_reject: float = 0.99) -> np.ndarray:
    """Scrambled Halton points in ``box``, keeping those at least ``margin``
    from the singular locus; ``(n, 4)`` array."""
    if n == 0:
        return np.zeros((0, 4))
    lo = np.array([box[k][0] for k in "xyzt"], float)
    hi = np.array([box[k][1] for k in "xyzt"], float)
    if np.any(hi <= lo):
        raise SamplingError("sampling box is empty")
    engine = qmc.Halton(d=4, scramble=True, seed=seed)
    kept, drawn = [], 0
    batch = max(64, 2 * n)
    while sum(len(k) for k in kept) < n:
        pts = qmc.scale(engine.random(batch), lo, hi)
        drawn += batch
        ok = np.ones(batch, bool) if singular is None else singular(pts) >= margin
        kept.append(pts[ok])
        accepted = sum(len(k) for k in kept)
        if drawn >= 100 * max(n, 10) or (drawn >= 10 * batch and accepted < (1 - max_reject) * drawn):
            if accepted < (1 - max_reject) * drawn or accepted < n:
                raise SamplingError(f"rejection rate {1 - accepted / drawn:.1%} exceeds {max_reject:.0%}")
    return np.concatenate(kept)[:n]


def sample_points(box, seed, n, singular=None, margin: float = SAMPLE_MARGIN) -> list[Point4]:
    return [Point4(*p) for p in sample_array(box, seed, n, singular, margin)]


# -- profile construction --------------------------------------------------

def _solve_H(cfg: Config):
    """Grid-backed H from a solver run described in ``cfg.H['solve']``."""
    opts = dict(cfg.H["solve"])
    n = int(opts.pop("grid", 129))
    xb, yb = cfg.box["x"], cfg.box["y"]
    grid = S.Grid2D(xb[0], xb[1], yb[0], yb[1], n, n)
    boundary = opts.pop("boundary", None)
    profile = opts.pop("profile", None)
    if (boundary is None) == (profile is None):
        raise ConfigError("solve needs exactly one of 'boundary' (expression for ln H) or 'profile'")
    c1, c2 = _coeffs(cfg.family)
    h = F.parse(cfg.h)
    if profile is not None:
        hv = h(np.array([[0.0, 0.0, 0.0, 0.0]]))[0]
        if not isinstance(h, F.Const) and not h.is_zero:
            hv_all = h(np.stack([grid.mesh()[0].ravel(), grid.mesh()[1].ravel(), np.zeros(n * n), np.zeros(n * n)], 1))
            if np.ptp(hv_all) > 0:
                raise ConfigError("a 1D profile needs constant h")
        prof = S.shoot_profile(c1, c2, float(hv), xb[0], xb[1], float(profile.get("left", -1.0)),
                               float(profile.get("right", -1.0)))
        boundary = prof.as_boundary()
    bvp = S.ProfileBVP(c1, c2, h, boundary, initial=opts.pop("initial", None), u_cap=float(opts.pop("u_cap", 50.0)))
    tol = float(opts.pop("tol", 1e-9))
    max_iter = int(opts.pop("max_iter", 50))
    if opts:
        raise ConfigError(f"unknown solve options {sorted(opts)}")
    res = S.solve(bvp, grid, tol=tol, max_iter=max_iter)
    return S.export_H(res), res


def _coeffs(family):
    from .families import PDE_COEFFS
    return PDE_COEFFS[Family(family)]


def make_H(cfg: Config):
    if "expr" in cfg.H:
        return F.parse(str(cfg.H["expr"])), None
    if "grid_path" in cfg.H:
        g = S.read_grid(cfg.resolve_path(cfg.H["grid_path"]))
        return S.export_H(g), None
    return _solve_H(cfg)


def make_coframe(cfg: Config):
    spec = cfg.coframe
    if isinstance(spec, dict) and "random" in spec:
        return random_coframe(int(spec["random"]), float(spec.get("amplitude", 0.12)))
    if isinstance(spec, list):
        return custom_coframe(spec)
    raise ConfigError("coframe must be a list of 4 rows or {'random': seed}")


# -- report -----------------------------------------------------------------

@dataclass
class SuiteReport:
    name: str
    anchor: str
    verdict: Outcome
    max_residual: float
    tolerance: float
    worst_point: list | None
    samples: int
    wall_time: float
    checks: list
    error: str | None = None
    residuals: list | None = None  # per-point max over bound checks, for plotting

    def to_dict(self, timing=True):
        d = {
            "name": self.name,
            "anchor": self.anchor,
            "verdict": self.verdict.value,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "worst_point": self.worst_point,
            "samples": self.samples,
            "checks": self.checks,
        }
        if timing:
            d["wall_time"] = self.wall_time
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class VerificationReport:
    family: str
    seed: int
    suites: list
    points: np.ndarray
    grid_backed: bool
    error: str | None = None
    solver: dict | None = None

    @property
    def verdict(self) -> str:
        if self.error:
            return "ERROR"
        outs = {s.verdict for s in self.suites}
        if Outcome.FAIL in outs:
            return "FAIL"
        if Outcome.INCONCLUSIVE in outs:
            return "INCONCLUSIVE"
        return "PASS"

    @property
    def exit_code(self) -> int:
        return {"PASS": 0, "FAIL": 1, "INCONCLUSIVE": 2, "ERROR": 3}[self.verdict]

    def suite(self, name) -> SuiteReport:
        for s in self.suites:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self, timing=True) -> dict:
        columns = {k: self.points[:, i].tolist() for i, k in enumerate("xyzt")}
        for s in self.suites:
            if s.residuals is not None:
                columns[s.name] = s.residuals
        d = {
            "family": self.family,
            "seed": self.seed,
            "grid_backed": self.grid_backed,
            "global_verdict": self.verdict,
            "suites": [s.to_dict(timing) for s in self.suites],
            "columns": columns,
        }
        if self.error:
            d["error"] = self.error
        if self.solver:
            d["solver"] = self.solver
        return d

    def to_json(self, timing=True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, allow_nan=True)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    def table(self) -> str:
        head = f"{'suite':<34} {'verdict':<13} {'max residual':>13} {'tolerance':>10} {'n':>4} {'time':>7}"
        lines = [head, "-" * len(head)]
        for s in self.suites:
            lines.append(f"{s.name:<34} {s.verdict.value:<13} {s.max_residual:>13.3e} {s.tolerance:>10.1e} "
                         f"{s.samples:>4} {s.wall_time:>6.2f}s")
            if s.error:
                lines.append(f"    error: {s.error}")
        lines.append(f"global verdict: {self.verdict}" + (f" ({self.error})" if self.error else ""))
        return "\n".join(lines)


def _finite(x: float):
    return x if math.isfinite(x) else str(x)


def run_suite(key: str, ctx: Context) -> SuiteReport:
    s = REGISTRY[key]
    name = s.reported_name(ctx.family)
    t0 = time.perf_counter()
    n = len(ctx.points)
    if n == 0:
        return SuiteReport(name, s.anchor, Outcome.INCONCLUSIVE, 0.0, ctx.tol, None, 0, 0.0, [], "no sample points")
    try:
        checks = s.fn(ctx)
    except Exception as exc:  # captured per suite, never aborts the run
        log.debug("suite %s raised", name, exc_info=True)
        return SuiteReport(name, s.anchor, Outcome.FAIL, math.inf, ctx.tol, None, n,
                           time.perf_counter() - t0, [], f"{type(exc).__name__}: {exc}")
    outcomes = [c.outcome for c in checks]
    if Outcome.FAIL in outcomes:
        verdict = Outcome.FAIL
    elif Outcome.INCONCLUSIVE in outcomes:
        verdict = Outcome.INCONCLUSIVE
    else:
        verdict = Outcome.PASS
    bound = [c for c in checks if c.kind == "bound" and c.aggregate]
    if bound:
        per_point = np.max(np.stack([c.values for c in bound]), axis=0)
        worst = int(np.argmax(per_point))
        max_res = float(per_point[worst])
        tol = max(c.threshold for c in bound)
    else:
        shown = [c for c in checks if c.aggregate]
        per_point = np.max(np.stack([c.values for c in shown]), axis=0)
        worst = int(np.argmax(per_point))
        max_res = float(per_point[worst])
        tol = shown[0].threshold
    check_rows = [
        {"name": c.name, "kind": c.kind, "max": _finite(c.max), "threshold": c.threshold,
         "outcome": c.outcome.value, "worst_point": ctx.points[c.worst].tolist() if c.worst >= 0 else None}
        for c in checks
    ]
    return SuiteReport(name, s.anchor, verdict, max_res, tol, ctx.points[worst].tolist(), n,
                       time.perf_counter() - t0, check_rows, residuals=per_point.tolist())


def build_context(cfg: Config, seed: int | None = None):
    seed = cfg.seed if seed is None else seed
    solver_info = None
    if cfg.family is Family.CUSTOM:
        coframe = make_coframe(cfg)
        construction = None
        singular = coframe.singular_distance
    else:
        H, res = make_H(cfg)
        if res is not None:
            solver_info = {"iterations": res.iterations, "residual": res.residual, "history": res.history}
        spec = FamilySpec(cfg.family, F.parse(cfg.h), H, cfg.box, seed)
        construction = build(spec)
        coframe = construction.coframe
        singular = SINGULAR_DISTANCE[cfg.family]
    pts = sample_array(cfg.box, seed, cfg.samples, singular, cfg.margin)
    ctx = Context(coframe, pts, cfg.tolerances, construction, cfg.family, seed)
    return ctx, solver_info


def run(cfg: Config, seed: int | None = None, suites=None) -> VerificationReport:
    """Execute the selected suites; configuration and solver failures yield an ERROR report."""
    seed = cfg.seed if seed is None else seed
    names = suites if suites is not None else cfg.suites
    try:
        keys = resolve(names, cfg.family)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    try:
        ctx, solver_info = build_context(cfg, seed)
    except (S.SolverError, SamplingError, F.FieldDomainError, ConfigError, ValueError) as exc:
        rows = [SuiteReport(REGISTRY[k].reported_name(cfg.family), REGISTRY[k].anchor, Outcome.FAIL, math.inf,
                            cfg.tolerances["closed_form"], None, 0, 0.0, [], f"{type(exc).__name__}: {exc}")
                for k in keys]
        solver = {"history": exc.history} if isinstance(exc, S.SolverError) else None
        return VerificationReport(cfg.family.value, seed, rows, np.zeros((0, 4)), False,
                                  f"{type(exc).__name__}: {exc}", solver)
    reports = [run_suite(k, ctx) for k in keys]
    return VerificationReport(cfg.family.value, seed, reports, ctx.points, ctx.grid_backed, None, solver_info)
