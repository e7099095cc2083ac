"""Decay-rate formulas: how friction, interaction strength and delay set the rate.

Run with ``python demos/rates_tour.py``.
"""
import numpy as np

from delayvfp.rates import (RateParameters, eta_bar, halanay_rate, hypocoercive_rate, lambdas,
                            optimal_gamma, overall_rate)

# Without interaction the rate is the hypocoercive one.  It vanishes for weak
# and for strong friction, with a single best friction in between.
g_star = optimal_gamma()
print(f"best friction {g_star:.6f}, rate there {hypocoercive_rate(g_star):.6f}")
for g in (0.1, 1.0, g_star, 5.0, 20.0):
    print(f"  gamma = {g:7.4f}  rate = {hypocoercive_rate(g):.6f}")

# An interaction of strength eta costs rate twice: lambda1 drops and the delayed
# term lambda2 appears.  eta_bar(gamma) bounds the admissible strengths.
gamma = 1.0
print(f"\nadmissible strengths at gamma = 1: eta <= {eta_bar(gamma):.4f}")
for eta in (0.0, 0.1, 0.25, eta_bar(gamma)):
    l1, l2 = lambdas(gamma, eta)
    print(f"  eta = {eta:.4f}  lambda1 = {l1:.6f}  lambda2 = {l2:.6f}")

# Outside the admissible set every violated condition is named.
bad = RateParameters(gamma=1.0, eta=0.4)
print("\neta = 0.4 is valid:", bad.valid)
print("  failed conditions:", [k for k, ok in bad.flags.items() if not ok])

# With a delay window H the rate is the root of lam = a - b exp(lam H).  It
# falls from a - b at H = 0 towards zero as H grows.
print("\noverall rate at gamma = 1, eta = 1/4:")
for H in (0.0, 0.1, 1.0, 10.0, 100.0):
    print(f"  H = {H:6.1f}  lambda = {overall_rate(1.0, 0.25, H):.6f}")

a, b = lambdas(1.0, 0.25)
H = np.logspace(-3, 3, 7)
lam = np.array([halanay_rate(a, b, h) for h in H])
print(f"\nrate times H tends to log(lambda1 / lambda2) = {np.log(a / b):.4f}:")
print("  ", np.round(lam * H, 4))
