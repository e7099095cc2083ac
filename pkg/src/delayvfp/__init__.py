"""Second-order interacting particle systems with a time-averaged delayed interaction.

Decay-rate formulas, an Euler-Maruyama particle simulator with a delay
history buffer, empirical Wasserstein distances, the infinite-delay Kummer
comparison function, stationary densities and numerical audits of the
contraction argument.
"""
from ._version import __version__
from .exceptions import (ConfigError, ConvergenceError, DelayVFPError, DivergenceError,
                         DomainError, InternalError, InvalidInputError, NoPositiveRateError,
                         ValidityError)
from .kummer import (KummerParams, decay_exponent_fit, integro_ode_solve, kummer_m,
                     phi_infinite_delay)
from .metrics import (QuadraticForm, distQ_coupled_upper, distQ_exact, dist2_exact,
                      equivalence_constants, theorem_form)
from .model import (AffineInteraction, DriftModel, PotentialInstance, builtin_potential,
                    linear_model, rescale_time)
from .rates import (RateParameters, derivation_constants, eta_bar, halanay_rate,
                    hypocoercive_rate, lambdas, lambert_w0, optimal_gamma, overall_rate)
from .simulator import EnsembleState, HistoryBuffer, SimConfig, gaussian_init, run, run_coupled
from .stationary import GridSpec, fixed_point_rho, free_energy, maxwellian, verify_stationarity
from .trace import DecayTrace, fit_exponential, fit_power_law
from .verify import check_inequality, halanay_compare_solve, picard_converge

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
