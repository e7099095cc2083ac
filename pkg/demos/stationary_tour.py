"""Self-consistent stationary states.

The stationary position density solves
``rho = exp(-(Phi + U * rho) / theta^2) / Z``.  A damped fixed-point iteration
on a grid finds it; the velocity marginal is Maxwellian.

Run with ``python demos/stationary_tour.py``.
"""
import numpy as np

from delayvfp.model import DriftModel, builtin_potential
from delayvfp.simulator import SimConfig
from delayvfp.stationary import GridSpec, fixed_point_rho, verify_stationarity

grid = GridSpec.from_delta(8.0, 0.05)
x = grid.axis

# Harmonic confinement with an attracting quadratic interaction.  The answer is
# Gaussian with variance theta^2 / (1 + k), which the grid reproduces.
for k in (0.0, 0.5, 2.0):
    pot = builtin_potential("quadratic", interaction="quadratic", k=k)
    res = fixed_point_rho(grid, pot.Phi, pot.U, 1.0)
    var = np.sum(x * x * res.rho.values) * grid.delta
    print(f"k = {k}: variance {var:.6f} (closed form {1 / (1 + k):.6f}), "
          f"{res.iterations} iterations, free energy {res.free_energy:.5f}")

# A bounded Gaussian well: no closed form, but the iteration still converges.
pot = builtin_potential("quadratic", interaction="gaussian", k=0.3)
res = fixed_point_rho(grid, pot.Phi, pot.U, 1.0)
print(f"gaussian well: residual {res.residual:.1e}, peak density {res.rho.values.max():.5f}")

# Sampling from the grid state and running the particle system should leave
# the low moments unchanged.  Each of the six checks is a 3-sigma test, so an
# occasional seed fails one by chance.
pot = builtin_potential("quadratic")
res = fixed_point_rho(grid, pot.Phi, None, 1.0)
rep = verify_stationarity(res, DriftModel(d=1, gamma=1.0, sigma=1.0),
                          SimConfig(dt=0.002, t_final=10.0, n=4000, seed=0))
print("moment drift in standard errors:", {k: round(z, 2) for k, z in rep.z_scores.items()})
print(f"velocity variance {rep.velocity_variance:.4f}; stationary: {rep.passed}")
