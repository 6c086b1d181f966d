"""Command line harness.

Exit codes: 0 converged, 2 max iterations (or otherwise not converged),
3 rank-deficient FGMRES failure, 4 usage or I/O error, 5 halted by the
SDC detector.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from .experiment import (CSV_COLUMNS, MatrixSource, RunSpec, SolverSettings, SweepPlan, _fmt,
                         make_row, run_one, run_sweep, summarize)
from .gmres import GmresConfig, Status, gmres_solve
from .hessenberg import LsqMode, LsqPolicy
from .mmio import MatrixMarketError, MatrixMarketIOError, write_matrix_market
from .sdc import DetectorAction, DetectorConfig, FaultClass, FaultInjector, FaultSpec, MgsPosition, SDCDetected
from .sparse import gen_poisson, matrix_info

EXIT_OK, EXIT_MAXITER, EXIT_RANKDEF, EXIT_USAGE, EXIT_HALT = 0, 2, 3, 4, 5

LSQ = {"standard": LsqMode.STANDARD, "fallback": LsqMode.FALLBACK_ON_NONFINITE,
       "svd": LsqMode.ALWAYS_RANK_REVEALING}
ACTIONS = {a.value: a for a in DetectorAction}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(conv, choices=None):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items or (choices and any(t not in choices for t in items)):
            raise argparse.ArgumentTypeError(f"expected comma list from {sorted(choices or [])}")
        return tuple(conv(t) for t in items)
    return parse


def _add_matrix_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix", metavar="PATH", help="Matrix Market file")
    g.add_argument("--poisson", metavar="N", type=int, help="n x n grid Poisson matrix")
    g.add_argument("--random", metavar="N", type=int, help="random sparse N x N test matrix")
    p.add_argument("--seed", type=int, default=0, help="seed for --random")


def _add_solver_args(p):
    p.add_argument("--inner-iters", type=int, default=25)
    p.add_argument("--outer-max", type=int, default=100)
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--detector-action", choices=sorted(ACTIONS), default="abort")
    p.add_argument("--lsq", choices=sorted(LSQ), default="standard",
                   help="least-squares policy of the (inner) GMRES")
    p.add_argument("--outer-lsq", choices=sorted(LSQ), default="svd")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftgmres", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-poisson", help="write the Poisson matrix as Matrix Market")
    p.add_argument("n", type=int)
    p.add_argument("out")

    p = sub.add_parser("info", help="print dimensions and norms of a matrix")
    p.add_argument("path")
    p.add_argument("--power-iters", type=int, default=100)

    p = sub.add_parser("solve", help="one GMRES or FT-GMRES solve with b = ones, x0 = 0")
    _add_matrix_args(p)
    _add_solver_args(p)
    p.add_argument("--solver", choices=["gmres", "ftgmres"], default="ftgmres")
    p.add_argument("--detector", choices=["on", "off"], default="off")
    p.add_argument("--fault-class", type=int, choices=[1, 2, 3])
    p.add_argument("--mgs-pos", choices=["first", "last"], default="first")
    p.add_argument("--target-solve", type=int, default=1)
    p.add_argument("--target-iter", type=int, default=1)
    p.add_argument("--out", metavar="CSV_PATH", help="append the report as one CSV row")
    p.add_argument("--sweep", action="store_true", help="run the sweep instead (same as 'sweep')")
    p.add_argument("--margin", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="single-fault sweep over all inner solve/iteration sites")
    _add_matrix_args(p)
    _add_solver_args(p)
    p.add_argument("--fault-class", type=_csv_list(lambda t: FaultClass(int(t)), {"1", "2", "3"}),
                   default=(FaultClass(2), FaultClass(3)))
    p.add_argument("--mgs-pos", type=_csv_list(MgsPosition, {"first", "last"}),
                   default=(MgsPosition.FIRST,))
    p.add_argument("--detector", type=_csv_list(lambda t: t == "on", {"on", "off"}), default=(False,))
    p.add_argument("--margin", type=int, default=1,
                   help="also target this many inner solves past the baseline count")
    p.add_argument("--out", metavar="CSV_PATH", required=True)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _source(args) -> MatrixSource:
    if args.matrix:
        return MatrixSource("file", args.matrix)
    if args.poisson is not None:
        return MatrixSource("poisson", str(args.poisson))
    return MatrixSource("random", f"{args.random}:{args.seed}")


def _settings(args) -> SolverSettings:
    if args.inner_iters < 1 or args.outer_max < 1 or args.rtol < 0:
        raise UsageError("iteration counts must be >= 1 and rtol >= 0")
    return SolverSettings(args.inner_iters, args.outer_max, args.rtol, LSQ[args.lsq],
                          LSQ[args.outer_lsq], ACTIONS[args.detector_action])


def cmd_gen_poisson(args) -> int:
    if args.n < 1:
        raise UsageError("n must be >= 1")
    A = gen_poisson(args.n)
    write_matrix_market(A, args.out, comment=f"poisson {args.n}")
    print(f"wrote {args.out}: {A.nrows} x {A.ncols}, {A.nnz} nonzeros")
    return EXIT_OK


def cmd_info(args) -> int:
    A = MatrixSource("file", args.path).load()
    info = matrix_info(A, max_iters=args.power_iters)
    print(f"rows            {info.dims[0]}")
    print(f"cols            {info.dims[1]}")
    print(f"nnz             {info.nnz}")
    print(f"frobenius_norm  {info.frobenius_norm:.10g}")
    flag = "" if info.two_norm_converged else "  (power iteration not converged)"
    print(f"two_norm_est    {info.two_norm_estimate:.10g}{flag}")
    print(f"two_norm_bound  {info.two_norm_bound:.10g}")
    return EXIT_OK


def _solve_gmres(A, args) -> int:
    det = DetectorConfig.for_matrix(A, ACTIONS[args.detector_action]) if args.detector == "on" else None
    cfg = GmresConfig(max_iters=args.outer_max, rtol=args.rtol, detector=det,
                      lsq_policy=LsqPolicy(LSQ[args.lsq]))
    inj = None
    if args.fault_class:
        inj = FaultInjector(FaultSpec(1, args.target_iter, MgsPosition(args.mgs_pos),
                                      FaultClass(args.fault_class)))
    b = np.ones(A.nrows)
    try:
        out = gmres_solve(A, b, None, cfg, inj)
    except SDCDetected as exc:
        print(f"status      Halted ({exc})")
        return EXIT_HALT
    res = float(np.linalg.norm(b - A.matvec(out.x)))
    print(f"status      {out.status.value}")
    print(f"iterations  {out.iterations}")
    print(f"residual    {res:.6e} (relative {res / np.linalg.norm(b):.6e})")
    print(f"detector    {len(out.detector_events)} events")
    if inj is not None:
        print(f"fault       {inj.fired}")
    if out.status in (Status.CONVERGED, Status.HAPPY_BREAKDOWN):
        return EXIT_OK
    return EXIT_MAXITER


def _solve_ftgmres(A, args, source) -> int:
    settings = _settings(args)
    spec = None
    if args.fault_class:
        spec = FaultSpec(args.target_solve, args.target_iter, MgsPosition(args.mgs_pos),
                         FaultClass(args.fault_class))
    rep = run_one(A, settings, args.detector == "on", spec, source.matrix_id)
    print(f"status             {rep.status}")
    print(f"outer_iterations   {rep.outer_iterations}")
    print(f"inner_iterations   {rep.inner_iterations_per_outer}")
    if rep.explicit_residual_history:
        rel = rep.explicit_residual_history[-1] / np.sqrt(A.nrows)
        print(f"relative_residual  {rel:.6e}")
    print(f"detector_events    {len(rep.detector_events)}")
    for ev in rep.detector_events:
        print(f"  {tuple(ev.location)} observed={ev.observed!r} bound={ev.bound!r}")
    print(f"fault_fired        {rep.fault_fired}")
    print(f"wall_time          {rep.wall_time:.3f}s")
    if args.out:
        base = run_one(A, settings, False, None, source.matrix_id).outer_iterations
        row = make_row(rep, RunSpec(args.detector == "on", spec), settings, base)
        fresh = not os.path.exists(args.out)
        with open(args.out, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if fresh:
                w.writerow(CSV_COLUMNS)
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    if rep.status == "Halted":
        return EXIT_HALT
    if rep.status == "RankDeficientFailure":
        return EXIT_RANKDEF
    return EXIT_OK if rep.converged else EXIT_MAXITER


def cmd_solve(args) -> int:
    if args.sweep:
        fc = (FaultClass(args.fault_class),) if args.fault_class else (FaultClass(2), FaultClass(3))
        args.fault_class = fc
        args.mgs_pos = (MgsPosition(args.mgs_pos),)
        args.detector = (args.detector == "on",)
        if not args.out:
            raise UsageError("--sweep needs --out")
        return cmd_sweep(args)
    source = _source(args)
    A = source.load()
    if args.solver == "gmres":
        return _solve_gmres(A, args)
    return _solve_ftgmres(A, args, source)


def cmd_sweep(args) -> int:
    if args.jobs < 1 or args.margin < 0:
        raise UsageError("--jobs must be >= 1 and --margin >= 0")
    plan = SweepPlan(_source(args), _settings(args), tuple(args.fault_class), tuple(args.mgs_pos),
                     tuple(args.detector), args.margin)
    rows = run_sweep(plan, args.out, jobs=args.jobs)
    base = next(r for r in rows if r["fault_class"] == "none")
    print(f"baseline outer iterations: {base['outer_iters']}")
    for (det, fc, pos), g in sorted(summarize(rows).items()):
        print(f"detector={det:3s} class={fc} mgs={pos:5s} fired={g.fired:4d} "
              f"max_delta={g.max_delta:+d} zero={g.zero_fraction:.0%} "
              f"detected={g.detected} converged={g.converged}")
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"gen-poisson": cmd_gen_poisson, "info": cmd_info, "solve": cmd_solve, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ftgmres: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatrixMarketError, MatrixMarketIOError, OSError) as exc:
        print(f"ftgmres: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
