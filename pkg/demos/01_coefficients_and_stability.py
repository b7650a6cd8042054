"""
Coefficients, error constants and stability of the tabulated methods
====================================================================

Every fixed-step method is checked against its order conditions, then the
error constant and the A(phi) angle are printed next to each other so the
three families can be compared at equal order.  A root locus is written to
CSV for plotting.
"""

import numpy as np

from limm.coeffs import FAMILIES, error_constant, fixed_coefficients, verify_order_conditions
from limm.stability import root_locus, stability_angle, zero_stable

print(f"{'family':8s} {'k':>2s} {'residual':>10s} {'C_k':>9s} {'angle':>9s}  zero-stable")
for family in FAMILIES:
    for k in range(1, 6):
        m = fixed_coefficients(family, k)
        print(
            f"{family:8s} {k:2d} {verify_order_conditions(m):10.1e} {error_constant(m):9.6f} "
            f"{stability_angle(m):9.4f}  {zero_stable(m)[0]}"
        )

# At order 5 the linearly implicit methods keep an angle above 70 degrees,
# where BDF5 is down to about 52.
loc = root_locus(fixed_coefficients("LIMM", 5), 2048)
np.savetxt("locus_limm5.csv", np.c_[loc.theta, loc.z.real, loc.z.imag], delimiter=",", header="theta,re,im", comments="")
print("wrote locus_limm5.csv")
