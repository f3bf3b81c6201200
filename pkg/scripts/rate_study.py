#!/usr/bin/env python3
"""Empirical convergence-rate study.

Runs the main solver on deliberately ill-conditioned convex instances (dense
QP and l1-on-ball least squares) and on indefinite QPs, fits the log-log
slope of the best stationarity residual against iteration count, and prints
a table next to the theoretical exponents (-3/2 convex, -1/2 worst-case
nonconvex).  Also reports the scaled-residual trend over the tail of the
grid, which is the finite-run stand-in for the asymptotic claims.
"""

import argparse

import numpy as np

from fistalab import (
    SolverConfig,
    check_scaled_trend,
    fit_rate,
    iterates_settled,
    make_convex_qp,
    make_lasso_on_ball,
    make_nonconvex_qp,
    run_mfista,
)


def run(p, max_iters):
    cfg = SolverConfig(epsilon=1e-300, max_iters=max_iters)
    return run_mfista(p, cfg, p.h_prox(np.zeros(p.dim), 1.0))


def study_row(label, trace, iters, exponent, grid_lo=100):
    best = np.minimum.accumulate(trace.column("vnorm"))
    floor = 1e-13 * max(1.0, trace.vnorm[0])
    alive = np.flatnonzero(best > floor)
    top = int(alive[-1]) + 1 if alive.size else 0
    if top < grid_lo * 10**1.5:
        print(f"{label:<28s} (run too short for a fit)")
        return
    grid = np.unique(np.geomspace(grid_lo, top, 24).astype(int))
    fit = fit_rate(trace, grid)
    trend = check_scaled_trend(trace, exponent, grid)
    print(f"{label:<28s} slope {fit.slope:+.3f}  r2 {fit.r_squared:.4f}  "
          f"theory {-exponent:+.1f}  trend[{trend.status}] net x{trend.worst:.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iters", type=int, default=10_000)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    print("== convex: ill-conditioned QP (spectrum 1e-7..1), n=32 ==")
    for seed in range(args.seeds):
        p, _ = make_convex_qp(32, seed, eigenvalues=np.geomspace(1e-7, 1.0, 32),
                              interior_opt=True)
        res = run(p, args.iters)
        study_row(f"convex-qp seed={seed}", res.trace, res.iterations, 1.5)

    print("== convex: l1 least squares on a padded ball, n=32 ==")
    for seed in range(args.seeds):
        p, _ = make_lasso_on_ball(32, 32, seed, weight_scale=3e-5,
                                  singular_values=np.geomspace(8e-3, 1.0, 32))
        res = run(p, args.iters)
        study_row(f"lasso-ball seed={seed}", res.trace, res.iterations, 1.5)

    print("== nonconvex: indefinite QP, n=12 (settling runs only) ==")
    for seed in range(max(args.seeds, 6)):
        p, _ = make_nonconvex_qp(12, seed)
        y0 = np.random.default_rng(1000 + seed).uniform(-0.9, 0.9, 12)
        res = run_mfista(p, SolverConfig(epsilon=1e-300, max_iters=args.iters), y0)
        if not iterates_settled(res.trace):
            print(f"nonconvex-qp seed={seed}          (iterates did not settle; skipped)")
            continue
        study_row(f"nonconvex-qp seed={seed}", res.trace, res.iterations, 0.5, grid_lo=10)


if __name__ == "__main__":
    main()
