"""Unbounded memory: the comparison function decays like a power law.

With the delay window covering the whole past the comparison equation
``y' = -lambda1 y + lambda2 (1/t) int_0^t y`` has a closed-form solution in
terms of Kummer's function, decaying like ``t^(Lambda - 1)`` with
``Lambda = lambda2 / lambda1``.

Run with ``python demos/kummer_tour.py``.
"""
import numpy as np

from delayvfp.kummer import (KummerParams, decay_exponent_fit, integro_ode_solve, kummer_m,
                             phi_infinite_delay)

# The scaled function exp(-tau) M(Lambda, 1, tau) behaves like tau^(Lambda-1).
for tau in (1.0, 10.0, 60.0, 500.0):
    print(f"  tau = {tau:6.1f}  M(0.5, 1, tau) = {kummer_m(0.5, tau):.6e}")

# Closed form against a direct solve of the integro-differential equation.
for lam2 in (0.25, 0.5, 0.9):
    tr = integro_ode_solve(1.0, lam2, 1.0, 1.0, 41.0, 1e-3)
    phi = phi_infinite_delay(KummerParams(1.0, lam2, 1.0, 1.0), tr.times)
    rel = np.max(np.abs(phi / tr.values - 1))
    long = integro_ode_solve(1.0, lam2, 1.0, 1.0, 1000.0, 1e-2)
    slope = decay_exponent_fit(long, window=(100.0, 1000.0))
    print(f"Lambda = {lam2}: closed form vs solver {rel:.1e}; "
          f"log-log slope {slope:+.3f} (expected {lam2 - 1:+.3f})")
