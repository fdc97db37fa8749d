"""Compare the singular term with the Lian-Zhang term on min x s.t. x = 1.

The singular term (linear growth, w = 0) is exact once lambda exceeds 1/2;
the Lian-Zhang term drives inf F_lambda below f* = 1 for every lambda.
"""

import numpy as np

from parampen.diagnostics import exactness_detector
from parampen.oracle import oracle_inf_F
from parampen.registry import load_problem
from parampen.singular import lianzhang_penalty, singular_penalty


def main():
    prob = load_problem("lianzhang-1d")
    singular = singular_penalty(prob)
    lz = lianzhang_penalty(prob)
    print(f"{'lambda':>10} {'inf F singular':>16} {'inf F lian-zhang':>18}")
    for lam in np.geomspace(0.1, 1e4, 6):
        a = oracle_inf_F(singular, lam).value
        b = oracle_inf_F(lz, lam).value
        print(f"{lam:>10.3g} {a:>16.10f} {b:>18.10f}")
    v = exactness_detector(singular, prob, 10.0)
    print("singular verdict:", v.verdict.name, "lambda* in", v.lambda_star_estimate)
    v = exactness_detector(lz, prob, 1e4)
    print("lian-zhang verdict:", v.verdict.name, "witness F =", v.witness.F_value)


if __name__ == "__main__":
    main()
