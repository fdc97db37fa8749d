"""Gap between the smoothed and the nonsmooth l1 penalty as p shrinks."""

import numpy as np

from parampen.oracle import grid_minimize
from parampen.registry import load_problem
from parampen.smoothing import base_objective, exp_smoothing, inf_gap_certificate, smoothed_objective


def main():
    prob = load_problem("qp-2d")
    approx = exp_smoothing(prob)
    lam = 2.0
    lo, hi = prob.box.finite_bounds()
    base = grid_minimize(base_objective(approx, lam), lo, hi, 1e-2).value
    print(f"inf g = {base:.8f}")
    for p in (1.0, 0.1, 0.01, 1e-3):
        val = grid_minimize(smoothed_objective(approx, lam, p), lo, hi, 1e-2).value
        ok = inf_gap_certificate(approx, prob, lam, p, base, val)
        print(f"p = {p:<6g} inf F = {val:.8f} gap {val - base:.2e} "
              f"bound {lam * float(approx.error_bound(p)):.2e} certified {ok}")


if __name__ == "__main__":
    main()
