"""Infinite-memory comparison equation and its Kummer-function solution.

With the whole history in memory the comparison function solves

    phi'(t) = -lambda1 phi(t) + lambda2 / (t - t0) * int_{t0}^t phi(s) ds,

whose solution is ``phi = y0 exp(-tau) M(Lambda, 1, tau)`` with
``tau = lambda1 (t - t0)`` and ``Lambda = lambda2 / lambda1``.  Since
``M(Lambda, 1, tau) ~ exp(tau) tau^(Lambda - 1) / Gamma(Lambda)``, phi decays
like ``t^(Lambda - 1)``: polynomially, not exponentially.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InvalidInputError
from .trace import DecayTrace, LineFit, fit_power_law

__all__ = [
    "KummerParams",
    "kummer_m",
    "kummer_m_scaled",
    "phi_infinite_delay",
    "integro_ode_solve",
    "decay_exponent_fit",
    "SERIES_SWITCH",
]

SERIES_SWITCH = 50.0


@dataclass(frozen=True)
class KummerParams:
    lambda1: float
    lambda2: float
    y0: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise DomainError("lambda1 must be positive")
        if self.lambda2 < 0:
            raise DomainError("lambda2 must be nonnegative")
        if not self.lambda2 < self.lambda1:
            raise DomainError(f"Lambda = lambda2/lambda1 must lie in [0, 1), got {self.Lambda}")
        if not self.y0 > 0:
            raise DomainError("y0 must be positive")
        if self.t0 < 0:
            raise DomainError("t0 must be nonnegative")

    @property
    def Lambda(self) -> float:
        return self.lambda2 / self.lambda1


def _check_lambda(lam):
    # Lambda = 1 is admitted as the boundary case M(1, 1, tau) = exp(tau)
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"Lambda must lie in [0, 1], got {lam}")


def _series_scaled(lam: float, tau: float) -> float:
    """exp(-tau) * sum_n (lam)_n tau^n / (n!)^2."""
    term = 1.0
    total = 1.0
    n = 0
    while True:
        term *= (lam + n) * tau / ((n + 1) * (n + 1))
        n += 1
        total += term
        if term == 0.0 or (n > tau and term <= 1e-16 * total):
            break
        if n > 10_000:
            raise DomainError("Kummer series did not converge")
    return total * math.exp(-tau)


def _asymptotic_scaled(lam: float, tau: float) -> float:
    """exp(-tau) M(lam, 1, tau) from the large-tau expansion of the dominant part.

    Uses tau^(lam-1)/Gamma(lam) * sum_s ((1-lam)_s)^2 / s! tau^(-s), truncated
    at its smallest term; the recessive part is O(exp(-tau)) relative.
    """
    a = 1.0 - lam
    term = 1.0
    total = 1.0
    s = 0
    while True:
        nxt = term * (a + s) * (a + s) / ((s + 1) * tau)
        if abs(nxt) >= abs(term) or abs(nxt) <= 1e-17 * abs(total):
            if abs(nxt) < abs(term):
                total += nxt
            break
        term = nxt
        total += term
        s += 1
    return total * tau ** (lam - 1.0) / math.gamma(lam)


def kummer_m_scaled(lam: float, tau: float) -> float:
    """``exp(-tau) M(lam, 1, tau)``; finite for all ``tau >= 0``."""
    lam, tau = float(lam), float(tau)
    _check_lambda(lam)
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    if lam == 0.0:
        return math.exp(-tau)
    if tau > SERIES_SWITCH:
        return _asymptotic_scaled(lam, tau)
    return _series_scaled(lam, tau)


def kummer_m(lam: float, tau: float, branch: str = "auto") -> float:
    """Confluent hypergeometric ``M(lam, 1, tau) = sum (lam)_n tau^n / (n!)^2``.

    ``branch`` forces ``"series"`` or ``"asymptotic"`` evaluation; ``"auto"``
    switches to the asymptotic expansion above ``tau = 50``.
    """
    lam, tau = float(lam), float(tau)
    _check_lambda(lam)
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    if lam == 0.0:
        return 1.0
    if branch == "auto":
        branch = "asymptotic" if tau > SERIES_SWITCH else "series"
    if branch == "series":
        return _series_scaled(lam, tau) * math.exp(tau)
    if branch == "asymptotic":
        if tau == 0:
            raise DomainError("asymptotic branch needs tau > 0")
        return _asymptotic_scaled(lam, tau) * math.exp(tau)
    raise ValueError(f"unknown branch {branch!r}")


def phi_infinite_delay(params: KummerParams, t):
    """Closed-form comparison function ``y0 exp(-tau) M(Lambda, 1, tau)``, ``tau = lambda1 (t - t0)``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < params.t0):
        raise DomainError("phi is defined for t >= t0")
    lam = params.Lambda
    out = np.array([params.y0 * kummer_m_scaled(lam, params.lambda1 * (tk - params.t0))
                    for tk in np.ravel(t_arr)]).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def integro_ode_solve(lambda1: float, lambda2: float, y0: float, t0: float,
                      t_final: float, dt: float) -> DecayTrace:
    """RK4 for ``phi' = -lambda1 phi + lambda2 I / (t - t0)``, ``I' = phi``, ``I(t0) = 0``.

    The memory starts at ``t0``; at ``t = t0`` the average ``I/(t - t0)`` is
    replaced by its limit ``phi(t0)``.
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if t_final < t0:
        raise InvalidInputError("t_final must not precede t0")
    n = int(round((t_final - t0) / dt))

    def rhs(s, phi, integral):
        avg = phi if s == 0.0 else integral / s
        return -lambda1 * phi + lambda2 * avg, phi

    phi, integral = float(y0), 0.0
    values = np.empty(n + 1)
    values[0] = phi
    for k in range(n):
        s = k * dt
        k1p, k1i = rhs(s, phi, integral)
        k2p, k2i = rhs(s + dt / 2, phi + dt / 2 * k1p, integral + dt / 2 * k1i)
        k3p, k3i = rhs(s + dt / 2, phi + dt / 2 * k2p, integral + dt / 2 * k2i)
        k4p, k4i = rhs(s + dt, phi + dt * k3p, integral + dt * k3i)
        phi += dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        integral += dt / 6 * (k1i + 2 * k2i + 2 * k3i + k4i)
        values[k + 1] = phi
    times = t0 + dt * np.arange(n + 1)
    return DecayTrace(times, values, "phi",
                      {"lambda1": lambda1, "lambda2": lambda2, "y0": y0, "t0": t0, "dt": dt})


def decay_exponent_fit(trace: DecayTrace, window: tuple[float, float] | None = None,
                       lambda1: float | None = None, full: bool = False):
    """Slope of ``log phi`` against ``log t`` over ``window``.

    Without an explicit window the fit starts at ``50 / lambda1`` (taken from
    the argument or ``trace.meta``).  Returns the slope, or the whole
    :class:`LineFit` when ``full`` is set.
    """
    if window is None:
        lam1 = lambda1 if lambda1 is not None else trace.meta.get("lambda1")
        lo = 50.0 / lam1 if lam1 else trace.times[0]
        window = (lo, np.inf)
    w = trace.window(*window)
    if np.any(w.values <= 0):
        raise InvalidInputError("decay exponent fit needs a positive trace")
    fit: LineFit = fit_power_law(w)
    return fit if full else fit.slope
