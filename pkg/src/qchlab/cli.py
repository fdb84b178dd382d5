"""Command line entry point: ``qchlab verify | solve-h | sample``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import fields as F
from . import solver as S
from .families import PDE_COEFFS, Family
from .harness import Config, ConfigError, SamplingError, run, sample_array
from .families import SINGULAR_DISTANCE

EXIT_CONFIG = 3


def _verify(args) -> int:
    cfg = Config.load(args.config)
    suites = [s for s in args.suites.split(",")] if args.suites else None
    report = run(cfg, seed=args.seed, suites=suites)
    print(report.table())
    path = args.report or cfg.report_path
    if path:
        report.write(cfg.resolve_path(path) if not args.report else path)
    return report.exit_code


def _solve_h(args) -> int:
    fam = Family(args.family)
    c1, c2 = PDE_COEFFS[fam]
    lo, hi = args.box
    grid = S.Grid2D(lo, hi, lo, hi, args.grid, args.grid)
    h = F.parse(args.h)
    if args.boundary:
        boundary = F.parse(args.boundary)
    else:
        hv = float(h(np.zeros((1, 4)))[0])
        boundary = S.shoot_profile(c1, c2, hv, lo, hi, args.left, args.right).as_boundary()
    bvp = S.ProfileBVP(c1, c2, h, boundary, initial=args.initial)
    res = S.solve(bvp, grid, tol=args.tol, max_iter=args.max_iter)
    S.write_grid(res.grid, args.out)
    print(f"solved {fam.value} on {args.grid}x{args.grid}: {res.iterations} iterations, "
          f"residual {res.residual:.3e}; wrote {args.out}")
    return 0


def _sample(args) -> int:
    cfg = Config.load(args.config)
    sing = SINGULAR_DISTANCE.get(cfg.family)
    pts = sample_array(cfg.box, cfg.seed if args.seed is None else args.seed, cfg.samples, sing, cfg.margin)
    json.dump([dict(zip("xyzt", map(float, p))) for p in pts], sys.stdout, indent=1)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qchlab", description="Verify Hermitian / QCH Kaehler surface constructions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run residual suites from a JSON config")
    v.add_argument("--config", required=True)
    v.add_argument("--report", help="write the JSON report here (overrides report_path)")
    v.add_argument("--suites", help="comma-separated suite names")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=_verify)

    s = sub.add_parser("solve-h", help="solve the profile equation for ln H and write a grid file")
    s.add_argument("--family", required=True, choices=[f.value for f in PDE_COEFFS])
    s.add_argument("--h", default="1", help="expression for h(x, y)")
    s.add_argument("--grid", type=int, default=129)
    s.add_argument("--out", required=True)
    s.add_argument("--box", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    s.add_argument("--boundary", help="expression for ln H on the boundary (default: 1D shooting profile)")
    s.add_argument("--left", type=float, default=-1.0, help="profile value at x = LO")
    s.add_argument("--right", type=float, default=-1.0, help="profile value at x = HI")
    s.add_argument("--initial", default="0", help="initial iterate for ln H")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=50)
    s.set_defaults(func=_solve_h)

    d = sub.add_parser("sample", help="print the sample points of a config as JSON")
    d.add_argument("--config", required=True)
    d.add_argument("--seed", type=int)
    d.set_defaults(func=_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, SamplingError, S.SolverError, F.ExpressionError, F.FieldDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
