"""Grid-refinement study: Pompeiu right-inverse residual, solver residuals and
the operator-norm estimate as functions of resolution.

    python scripts/convergence_study.py --sizes 64 128 256 --out convergence.csv
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from gaf.cauchy import operator_norm_estimate, plan_build
from gaf.grid import DENSITY, ComplexField, dbar_values, make_grid, relative_l2
from gaf.vekua import residual_pair, solve_psi, solve_psi_plus


@dataclass(frozen=True)
class StudyConfig:
    sizes: tuple[int, ...] = (64, 128, 256, 512)
    potential: complex = 0.1
    bump_width: float = 20.0
    margin: int = 3
    extra: dict = field(default_factory=dict)


def run(cfg: StudyConfig) -> list[dict]:
    rows = []
    for n in cfg.sizes:
        t0 = time.perf_counter()
        g = make_grid(-1, 1, -1, 1, n, n)
        plan = plan_build(g)
        bump = np.exp(-cfg.bump_width * np.abs(g.z) ** 2).astype(complex)
        pompeiu = relative_l2(dbar_values(plan.apply_values(bump), g) - bump, bump, g, cfg.margin, 1e-8)
        u = ComplexField.constant(g, cfg.potential, DENSITY)
        psi, rep = solve_psi(u, ComplexField.constant(g, 1), plan=plan)
        pp, _ = solve_psi_plus(u, ComplexField.from_expr(g, lambda z: z), plan=plan)
        r1, r2 = residual_pair(u, psi, pp, margin=cfg.margin)
        rows.append({
            "n": n,
            "pompeiu_residual": pompeiu,
            "r1": r1,
            "r2": r2,
            "iterations": rep.iterations,
            "q": rep.contraction,
            "norm_estimate": operator_norm_estimate(plan),
            "seconds": time.perf_counter() - t0,
        })
    return rows


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--sizes", type=int, nargs="+", default=list(StudyConfig.sizes))
    p.add_argument("--potential", type=complex, default=0.1)
    p.add_argument("--out", help="CSV output path (default: stdout table only)")
    args = p.parse_args(argv)
    rows = run(StudyConfig(tuple(args.sizes), args.potential))
    cols = list(rows[0])
    print("  ".join(f"{c:>16s}" for c in cols))
    prev = None
    for r in rows:
        print("  ".join(f"{r[c]:16.4g}" if isinstance(r[c], float) else f"{r[c]:16d}" for c in cols))
        if prev is not None:
            order = np.log2(prev["pompeiu_residual"] / r["pompeiu_residual"]) / np.log2(r["n"] / prev["n"])
            print(f"{'':>16s}  observed Pompeiu order {order:.2f}")
        prev = r
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
