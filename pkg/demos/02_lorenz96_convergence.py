"""
Fixed-step convergence on Lorenz-96
===================================

Lorenz-96 with N = 40 and forcing F(t) = 8 + 4 cos(3 pi t) is integrated
over [0, 0.5] with fixed steps h = 2^-5 .. 2^-11.  The reference is RK4
with 2^14 steps.  A least-squares fit of log(error) against log(h) gives
the observed order of each method.
"""

import numpy as np

from limm.integrate import integrate_fixed, reference_solution
from limm.problems import lorenz96

problem = lorenz96(40)
reference = reference_solution(problem, 2**14)
hs = 2.0 ** -np.arange(5, 12)

for family in ("LIMM", "LIMM-W"):
    for k in range(1, 6):
        errors = [np.linalg.norm(integrate_fixed(problem, family, k, h).final_state - reference) for h in hs]
        slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
        # the slope of the two finest points shows the asymptotic order
        tail = np.log(errors[-2] / errors[-1]) / np.log(2.0)
        print(f"{family:7s} k={k}  fitted slope {slope:5.3f}  finest pair {tail:5.3f}  error at 2^-11 {errors[-1]:.2e}")
