"""Command-line experiment runner; every command writes CSV.

Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .alphaskp import (
    EwaldConfig,
    NumericalFailure,
    assemble_alpha,
    bundled_rule_path,
    load_tabulated_rule,
    nkpa_svd,
    sinc_rule,
    sinc_rule_for_eps,
    skp_from_quadrature,
)
from .geometry import Box3, build_cell_grid, check_convergence_ratio, read_point_cloud, uniform_point_cloud
from .interpolation import WARN_ORDER
from .oracle import dense_reciprocal_apply
from .parallel import build_plan, message_ledger, run_kpme, write_ledger_csv

log = logging.getLogger("kpme")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    """``"2,4,8"`` or an inclusive range ``"2:16"``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 2,4,8 or 2:16, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _triple(text: str) -> tuple[int, int, int]:
    parts = text.replace("x", ",").split(",")
    try:
        vals = tuple(int(v) for v in parts)
    except ValueError:
        vals = ()
    if len(vals) == 1:
        vals = vals * 3
    if len(vals) != 3 or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected K or Kx,Ky,Kz with positive entries, got {text!r}")
    return vals


def _shapes(text: str) -> list[tuple[int, int, int]]:
    return [_triple(s) for s in text.split(";") if s.strip()]


@contextmanager
def _sink(path, default=None):
    if path is None or str(path) == "-":
        yield default or sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _shape_label(shape) -> str:
    return "x".join(str(k) for k in shape)


# -- shared problem setup -----------------------------------------------------------


def _add_problem_args(p: argparse.ArgumentParser, cells=True) -> None:
    p.add_argument("--particles", type=int, default=64, help="number of random particles")
    p.add_argument("--input", type=Path, help="point cloud file (N, then x y z q per line)")
    p.add_argument("--modes", type=int, default=2, help="mode bound M")
    p.add_argument("--order", type=int, default=8, help="interpolation points per axis L")
    if cells:
        p.add_argument("--cells", type=_triple, default=(1, 1, 1), help="cells per axis, K or Kx,Ky,Kz")
    p.add_argument("--xi", type=float, default=3.0, help="Ewald parameter")
    p.add_argument("--period", type=float, default=1.0, help="period of the lattice")
    p.add_argument("--radius", type=float, help="box half width (default: from --nu)")
    p.add_argument("--nu", type=float, default=0.25, help="target pi*M*r_c/period when --radius is not given")
    p.add_argument("--quad", choices=("sinc", "tab", "svd"), default="sinc", help="decomposition kind")
    p.add_argument("--eps", type=float, default=1e-10, help="quadrature precision or SVD tolerance")
    p.add_argument("--nquad", type=int, help="fixed sinc half-count (overrides --eps)")
    p.add_argument("--quad-file", type=Path, help="tabulated rule file (default: the bundled rule)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fuse-terms", action="store_true", help="one reduction per axis for all terms")
    p.add_argument("--threads", type=int, help="cap on concurrently computing ranks")


def _decomposition(args, cfg: EwaldConfig):
    if args.quad == "svd":
        return nkpa_svd(assemble_alpha(cfg), tol_outer=args.eps)
    if cfg.M == 0:
        raise ValueError("quadrature decompositions need M >= 1")
    if args.quad == "tab":
        return skp_from_quadrature(load_tabulated_rule(args.quad_file or bundled_rule_path(), cfg.M), cfg)
    rule = sinc_rule(args.nquad, cfg.M) if args.nquad else sinc_rule_for_eps(args.eps, cfg.M)
    return skp_from_quadrature(rule, cfg)


def _box_radius(args, M: int, kmin: int) -> float:
    if args.radius is not None:
        return args.radius
    if M == 0:
        return 0.5 * args.period
    return args.nu * kmin * args.period / (math.pi * M)


def _problem(args, cells):
    cfg = EwaldConfig(args.xi, args.modes)
    if args.input is not None:
        X, q = read_point_cloud(args.input)
        lo, hi = X.min(axis=0, initial=0.0), X.max(axis=0, initial=0.0)
        center = 0.5 * (lo + hi)
        radius = args.radius or max(float(np.max(hi - lo)) / 2, 1e-12) * (1 + 1e-9)
        box = Box3(tuple(center), radius, args.period)
    else:
        if args.particles < 0:
            raise ValueError("--particles must be non-negative")
        box = Box3((0.0, 0.0, 0.0), _box_radius(args, cfg.M, min(cells)), args.period)
        X, q = uniform_point_cloud(box, args.particles, seed=args.seed)
    if args.order > WARN_ORDER:
        log.warning("order %d > %d: equispaced interpolation may lose accuracy to rounding", args.order, WARN_ORDER)
    grid = build_cell_grid(box, cells)
    if cfg.M > 0:
        check = check_convergence_ratio(grid, cfg.M, warn=False)
        if not check.passed:
            log.warning("convergence ratio nu = %.3g >= 1; interpolation will not converge", check.nu)
    return cfg, box, grid, X, q


# -- commands -----------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg, box, grid, X, q = _problem(args, args.cells)
    dec = _decomposition(args, cfg)
    t0 = time.perf_counter()
    res = run_kpme(X, q, cfg, box, args.order, dec, cells=args.cells, fuse=args.fuse_terms, max_threads=args.threads)
    wall = (time.perf_counter() - t0) * 1e3
    err = ""
    if args.oracle:
        ref = dense_reciprocal_apply(X, X, q, cfg, box)
        denom = np.linalg.norm(ref)
        err = float(np.linalg.norm(res.potentials - ref) / denom) if denom > 0 else float(np.linalg.norm(res.potentials))
    with _sink(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y", "z", "q", "potential"])
        for i, (x, qi, z) in enumerate(zip(X, q, res.potentials)):
            w.writerow([i, repr(float(x[0])), repr(float(x[1])), repr(float(x[2])), repr(float(qi)), repr(float(z))])
    with _sink(args.summary, sys.stderr) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "M", "L", "K", "eps", "err_vs_oracle", "wall_ms"])
        w.writerow([len(X), cfg.M, args.order, _shape_label(args.cells), args.eps, err, f"{wall:.3f}"])
    if args.ledger:
        write_ledger_csv(args.ledger, res.ledger)
    return EXIT_OK


def convergence_rows(modes, ratios, orders, n_particles=100, xi=3.0, tol=1e-15, seed=0):
    """``(M, nu, L, rel_error)`` for one cell of half width ``nu / (pi M)``."""
    rows = []
    for M in modes:
        cfg = EwaldConfig(xi, M)
        dec = nkpa_svd(assemble_alpha(cfg), tol_outer=tol)
        for nu in ratios:
            box = Box3((0.0, 0.0, 0.0), nu / (math.pi * M))
            X, q = uniform_point_cloud(box, n_particles, seed=seed)
            ref = dense_reciprocal_apply(X, X, q, cfg, box)
            grid = build_cell_grid(box, 1)
            for L in orders:
                z = run_kpme(X, q, cfg, box, L, dec, plan=build_plan(cfg, grid, L, dec), max_threads=1).potentials
                rows.append((M, nu, L, float(np.linalg.norm(z - ref) / np.linalg.norm(ref))))
    return rows


def cmd_convergence(args) -> int:
    rows = convergence_rows(args.modes, args.ratios, args.orders, args.particles, args.xi, args.eps, args.seed)
    with _sink(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "nu", "L", "rel_error"])
        for M, nu, L, e in rows:
            w.writerow([M, nu, L, repr(e)])
    return EXIT_OK


def compression_rows(modes, eps_list, kind, quad_file=None, xi=3.0):
    """``(M, eps, terms, relative_rank)``; tabulated rules skip the ``M`` they do not cover."""
    rows = []
    for M in modes:
        cfg = EwaldConfig(xi, M)
        for eps in eps_list:
            if kind == "svd":
                dec = nkpa_svd(assemble_alpha(cfg), tol_outer=eps)
            elif kind == "sinc":
                dec = skp_from_quadrature(sinc_rule_for_eps(eps, M), cfg)
            else:
                rule = load_tabulated_rule(quad_file or bundled_rule_path())
                if not rule.covers(M) or rule.eps > eps:
                    log.info("tabulated rule does not serve M=%d at eps=%g; row skipped", M, eps)
                    continue
                dec = skp_from_quadrature(load_tabulated_rule(quad_file or bundled_rule_path(), M), cfg)
            rows.append((M, eps, len(dec), len(dec) / (2 * M + 1) ** 2))
    return rows


def cmd_compression(args) -> int:
    if min(args.modes) < 1:
        raise ValueError("mode bounds must be >= 1")
    kind = {"tab": "tabulated"}.get(args.kind, args.kind)
    rows = compression_rows(args.modes, args.eps, kind, args.quad_file, args.xi)
    with _sink(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "eps", "terms", "relative_rank"])
        for M, eps, n, rr in rows:
            w.writerow([M, eps, n, repr(rr)])
    return EXIT_OK


def scaling_rows(args, shapes):
    """Run one problem on every rank-grid shape; errors are relative to the first shape."""
    kmin = min(min(s) for s in shapes)
    cfg = EwaldConfig(args.xi, args.modes)
    if args.input is not None:
        _, box, _, X, q = _problem(args, shapes[0])
    else:
        box = Box3((0.0, 0.0, 0.0), _box_radius(args, cfg.M, kmin), args.period)
        X, q = uniform_point_cloud(box, args.particles, seed=args.seed)
    dec = _decomposition(args, cfg)
    rows, base = [], None
    for shape in shapes:
        res = run_kpme(X, q, cfg, box, args.order, dec, cells=shape, fuse=args.fuse_terms, max_threads=args.threads)
        if base is None:
            base = res.potentials
        denom = np.linalg.norm(base)
        err = float(np.linalg.norm(res.potentials - base) / denom) if denom > 0 else 0.0
        led = message_ledger(res.ledger)
        counts = {s["axis_reductions"] + s["allreduces"] for s in led.values()}
        payload = sum(sum(s["axis_payloads"]) + s["allreduce_payload"] for s in led.values())
        rows.append((shape, err, max(counts), payload, res.wall_ms, len(dec)))
    return rows


def cmd_scaling(args) -> int:
    rows = scaling_rows(args, args.shapes)
    with _sink(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shape", "gathered_error", "reductions", "payload_total", "wall_ms"])
        for shape, err, red, payload, wall, _ in rows:
            w.writerow([_shape_label(shape), repr(err), red, payload, f"{wall:.3f}"])
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kpme", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="potentials for one particle set")
    _add_problem_args(p)
    p.add_argument("--oracle", action="store_true", help="compare against the dense sum")
    p.add_argument("--ledger", type=Path, help="write the per-rank message ledger here")
    p.add_argument("--output", help="per-particle CSV (default stdout)")
    p.add_argument("--summary", help="summary CSV (default stderr)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="single-cell error against the dense sum versus order")
    p.add_argument("--modes", type=_int_list, default=[4])
    p.add_argument("--ratios", type=_float_list, default=[0.5, 0.25, 0.125])
    p.add_argument("--orders", type=_int_list, default=list(range(2, 17)))
    p.add_argument("--particles", type=int, default=100)
    p.add_argument("--xi", type=float, default=3.0)
    p.add_argument("--eps", type=float, default=1e-15, help="SVD truncation tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("compression", help="number of terms against mode bound and precision")
    p.add_argument("--modes", type=_int_list, default=list(range(1, 13)))
    p.add_argument("--eps", type=_float_list, default=[1e-4, 1e-8, 1e-12])
    p.add_argument("--kind", choices=("svd", "sinc", "tab"), default="svd")
    p.add_argument("--quad-file", type=Path)
    p.add_argument("--xi", type=float, default=3.0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_compression)

    p = sub.add_parser("scaling", help="one problem on several rank-grid shapes")
    _add_problem_args(p, cells=False)
    p.add_argument("--shapes", type=_shapes, default=_shapes("1,1,1;8,1,1;2,2,2;4,2,1"))
    p.add_argument("--output")
    p.set_defaults(func=cmd_scaling, particles=128, modes=4, order=8, quad="svd", eps=1e-15, nu=0.125)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="kpme: %(levelname)s: %(message)s"
    )
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (NumericalFailure, ArithmeticError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
