"""Penalty continuation on the two-dimensional NLP with MFCQ."""

from parampen.registry import load
from parampen.singular import singular_penalty
from parampen.solver import SolverConfig, diagnose_sequence, penalty_continuation


def main():
    entry = load("mfcq-nlp-2d")
    pen = singular_penalty(entry.problem)
    seq = penalty_continuation(pen, SolverConfig(lambda_schedule=(0.25, 2.0, 8), seed=1))
    print(f"{'lambda':>8} {'x1':>12} {'x2':>12} {'p':>10} {'F':>12}")
    for r in seq.records:
        print(f"{r.lam:>8.3g} {r.x[0]:>12.8f} {r.x[1]:>12.8f} {r.p:>10.2e} {r.F_value:>12.8f}")
    for check in diagnose_sequence(seq, entry.problem, entry.fstar, omega_lower=pen.omega_lower).checks:
        print(f"{check.name}: {check.status}")


if __name__ == "__main__":
    main()
