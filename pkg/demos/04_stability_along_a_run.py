"""
Stability-matrix products along an adaptive run
===============================================

An adaptive LIMM run on Lorenz-96 records its steps and orders.  Replaying
that sequence on the scalar test equation y' = lambda y multiplies one
companion matrix per step; the running norm of the product shows whether
the variable steps and orders the controller chose stay stable for a
stiff mode lambda.
"""

from limm.integrate import SolverOptions, integrate_adaptive
from limm.problems import lorenz96
from limm.stability import product_norm

report = integrate_adaptive(lorenz96(40), "LIMM", SolverOptions(rtol=1e-6, atol=1e-6, trace=True))
orders = [rec.k for rec in report.trace if rec.accepted]
print(f"{report.n_accepted} accepted steps, orders used {sorted(set(orders))}")

for lam in (0.0, -1.0, -100.0, -1e4):
    norms = product_norm(report.trace, "LIMM", lam)
    print(f"lambda = {lam:8.0f}: max norm {norms.max():8.3f}, final norm {norms[-1]:.3e}")

