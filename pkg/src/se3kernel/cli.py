"""
Command line interface.

    se3kernel kernel           tabulate the analytic kernel
    se3kernel enhance          convolve an orientation field with the kernel
    se3kernel symmetry-report  asymmetry sums of both sections
    se3kernel fbc              fiber to bundle coherence of a tractogram
    se3kernel oracle           compare the kernel with the PDE solution

Exit codes: 0 success, 2 invalid usage or input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .convolution import build_kernel_table, default_radius, shift_twist_convolve
from .fbc import fbc_scores, fiber_density, filter_tractogram
from .kernel import DiffusionParams, Section, asymmetry_sum
from .pde import (EvolutionConfig, auto_config, build_lb_operator, compare_with_table,
                  consistency_residual)
from .sphere import icosphere

log = logging.getLogger("se3kernel")

EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(ValueError):
    pass


def _positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _window(text: str):
    return "whole" if text == "whole" else _positive_int(text)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _params(args) -> DiffusionParams:
    return DiffusionParams(args.d33, args.d44, args.t)


def _diffusion_args(parser: argparse.ArgumentParser, d44: bool = True, t: bool = True) -> None:
    parser.add_argument("--d33", type=_positive, default=1.0, help="spatial diffusivity")
    if d44:
        parser.add_argument("--d44", type=_positive, default=0.02, help="angular diffusivity")
    if t:
        parser.add_argument("--t", type=_positive, required=True, help="diffusion time")


def cmd_kernel(args) -> None:
    p = _params(args)
    sphere = icosphere(args.sphere_level)
    section = Section(args.section)
    radius = args.radius or default_radius(p, section, sphere, args.spacing)
    table = build_kernel_table(p, section, radius, sphere, args.spacing, args.normalize)
    io.write_kernel(table, args.out)
    print(f"radius {radius} mass {_fmt(table.mass)} max {_fmt(table.values.max())}")


def cmd_enhance(args) -> None:
    u = io.read_field(args.field)
    p = _params(args)
    section = Section(args.section)
    radius = args.radius or default_radius(p, section, u.sphere, u.grid.spacing)
    table = build_kernel_table(p, section, radius, u.sphere, u.grid.spacing)
    w = shift_twist_convolve(table, u, args.boundary)
    io.write_field(w, args.out)
    print(f"input mass {_fmt(u.mass())} output mass {_fmt(w.mass())}")


def cmd_symmetry_report(args) -> None:
    if args.grid % 2 == 0:
        raise UsageError(f"--grid must be odd, got {args.grid}")
    sphere = icosphere(args.sphere_level)
    print("t\td44\tnew\tzero")
    for t in args.t:
        for d44 in args.d44:
            p = DiffusionParams(args.d33, d44, t)
            new = asymmetry_sum(args.grid // 2, sphere, p, Section.NEW)
            zero = asymmetry_sum(args.grid // 2, sphere, p, Section.ZERO)
            print(f"{t:g}\t{d44:g}\t{new:.6e}\t{zero:.6e}")


def cmd_fbc(args) -> None:
    tr = io.read_tractogram(args.tracto)
    density = fiber_density(tr, _params(args))
    result = fbc_scores(tr, density, args.window)
    rows = ["fiber\tfbc\tfbc_normalized\tmin_local_fbc"]
    for i, (raw, norm, low) in enumerate(zip(result.fiber_fbc, result.fiber_fbc_normalized,
                                             result.min_local())):
        rows.append(f"{i}\t{_fmt(raw)}\t{_fmt(norm)}\t{_fmt(low)}")
    text = "\n".join(rows) + "\n"
    if args.scores:
        with open(args.scores, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.filtered:
        kept = filter_tractogram(tr, result, args.threshold, args.mode)
        io.write_tractogram(kept, args.filtered)
        log.info("kept %d of %d fibers", len(kept), len(tr))


def cmd_oracle(args) -> None:
    if args.grid % 2 == 0:
        raise UsageError(f"--grid must be odd, got {args.grid}")
    p = _params(args)
    sphere = icosphere(args.sphere_level)
    lb = build_lb_operator(sphere)
    if args.dt == "auto":
        cfg = auto_config(p, args.spacing, lb, boundary="zero")
    else:
        dt = _positive(args.dt)
        steps = max(1, round(p.t / dt))
        if not math.isclose(steps * dt, p.t, rel_tol=1e-9):
            raise UsageError(f"--dt {dt} does not divide t = {p.t}")
        cfg = EvolutionConfig(dt, steps, "zero")
    table = build_kernel_table(p, Section(args.compare), args.grid // 2, sphere, args.spacing)
    stats = compare_with_table(table, p, cfg, lb)
    periodic = EvolutionConfig(cfg.dt, cfg.steps, "periodic")
    residual = consistency_residual(p, args.grid, sphere, args.spacing, periodic, lb)
    print(f"dt\t{_fmt(cfg.dt)}\nsteps\t{cfg.steps}")
    print(f"pearson\t{_fmt(stats['pearson'])}\nrelative_l2\t{_fmt(stats['relative_l2'])}")
    print(f"consistency_residual\t{_fmt(residual)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="se3kernel",
                                     description="Enhancement kernels on positions and orientations.")
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="BLAS threads (default: all cores)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="tabulate the kernel to a file")
    _diffusion_args(k)
    k.add_argument("--radius", type=_positive_int, default=None,
                   help="offsets in [-r, r]^3 (default: from the kernel decay)")
    k.add_argument("--sphere-level", type=int, default=1)
    k.add_argument("--section", choices=[s.value for s in Section], default="new")
    k.add_argument("--spacing", type=_positive, default=1.0)
    k.add_argument("--normalize", choices=["balanced", "column", "none"], default="balanced")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_kernel)

    e = sub.add_parser("enhance", help="convolve a field file with the kernel")
    e.add_argument("--field", required=True)
    _diffusion_args(e)
    e.add_argument("--radius", type=_positive_int, default=None)
    e.add_argument("--section", choices=[s.value for s in Section], default="new")
    e.add_argument("--boundary", choices=["zero", "periodic"], default="zero")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_enhance)

    s = sub.add_parser("symmetry-report", help="asymmetry sums as TSV")
    _diffusion_args(s, d44=False, t=False)
    s.add_argument("--t", type=_positive, nargs="+", default=[1.0, 2.0, 4.0])
    s.add_argument("--d44", type=_positive, nargs="+", default=[0.01, 0.02, 0.04])
    s.add_argument("--grid", type=_positive_int, default=5)
    s.add_argument("--sphere-level", type=int, default=1)
    s.set_defaults(func=cmd_symmetry_report)

    f = sub.add_parser("fbc", help="fiber to bundle coherence")
    f.add_argument("--tracto", required=True, help="streamline text file")
    _diffusion_args(f)
    f.add_argument("--window", type=_window, default=5, help="half width in points, or 'whole'")
    f.add_argument("--threshold", type=float, default=0.0)
    f.add_argument("--mode", choices=["per_fiber", "per_point_min"], default="per_fiber")
    f.add_argument("--scores", default=None, help="TSV output (default: stdout)")
    f.add_argument("--filtered", default=None, help="write kept fibers here")
    f.set_defaults(func=cmd_fbc)

    o = sub.add_parser("oracle", help="compare the kernel with the PDE impulse response")
    _diffusion_args(o)
    o.add_argument("--dt", default="auto")
    o.add_argument("--grid", type=_positive_int, default=7)
    o.add_argument("--spacing", type=_positive, default=1.0)
    o.add_argument("--sphere-level", type=int, default=1)
    o.add_argument("--compare", choices=[s.value for s in Section], default="new")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        with threadpool_limits(limits=args.threads):
            args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
