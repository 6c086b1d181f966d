"""Single-fault sweeps on the 2-D Poisson matrix.

Writes one CSV per experiment into --outdir and prints the delta histograms:

    python3 scripts/poisson_sweeps.py --outdir results/poisson

Existing CSVs are resumed, so an interrupted run can simply be restarted.
"""

import argparse
import sys
from pathlib import Path

from ftgmres.experiment import MatrixSource, SolverSettings, SweepPlan, run_sweep, summarize
from ftgmres.sdc import FaultClass, MgsPosition

EXPERIMENTS = {
    "small_first": ((FaultClass.SLIGHTLY_SMALLER, FaultClass.NEARLY_ZERO), MgsPosition.FIRST, (False,)),
    "large_first": ((FaultClass.LARGE,), MgsPosition.FIRST, (False, True)),
    "small_last": ((FaultClass.SLIGHTLY_SMALLER, FaultClass.NEARLY_ZERO), MgsPosition.LAST, (False,)),
    "large_last": ((FaultClass.LARGE,), MgsPosition.LAST, (False, True)),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100, help="grid size (matrix is n^2 x n^2)")
    ap.add_argument("--outdir", type=Path, default=Path("results/poisson"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", choices=sorted(EXPERIMENTS), nargs="*")
    args = ap.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)

    source = MatrixSource("poisson", str(args.n))
    A = source.load()
    for name in args.only or EXPERIMENTS:
        classes, pos, detectors = EXPERIMENTS[name]
        plan = SweepPlan(source, SolverSettings(), classes, (pos,), detectors)
        path = args.outdir / f"{source.matrix_id}_{name}.csv"
        rows = run_sweep(plan, path, jobs=args.jobs, A=A if args.jobs == 1 else None)
        print(f"{name}: baseline {rows[0]['outer_iters']} outer iterations -> {path}")
        for (det, fc, mgs), g in sorted(summarize(rows).items()):
            hist = ", ".join(f"{d:+d}:{c}" for d, c in sorted(g.deltas.items()))
            print(f"  detector={det:3s} class={fc} {mgs:5s} fired={g.fired} detected={g.detected} "
                  f"converged={g.converged} deltas {{{hist}}}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
