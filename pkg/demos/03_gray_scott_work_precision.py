"""
Adaptive runs on Gray-Scott: work against precision
===================================================

The three families integrate Gray-Scott on a 32 x 32 grid over [0, 2] with
rtol = atol = 1e-2 .. 1e-6.  For each run we print the error relative to a
fine RK4 reference, the number of steps, and the number of linear solves.
LIMM and LIMM-W need exactly one solve per attempted step; BDF needs one
per Newton iteration.
"""

from limm.cli import work_precision
from limm.integrate import reference_solution
from limm.problems import gray_scott

params = {"n": 32, "sparse_jacobian": True}
reference = reference_solution(gray_scott(**params), 4000)
records = work_precision("grayscott", params, ["LIMM", "LIMM-W", "BDF"], [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], reference)

print(f"{'method':7s} {'tol':>7s} {'error':>9s} {'steps':>6s} {'rejected':>8s} {'solves':>7s} {'seconds':>8s}")
for r in records:
    print(
        f"{r.method:7s} {r.tolerance:7.0e} {r.final_error:9.2e} {r.n_accepted:6d} {r.n_rejected:8d} "
        f"{r.n_linear_solves:7d} {r.wall_seconds:8.2f}"
    )
