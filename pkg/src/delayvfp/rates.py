"""Closed-form decay rates for the delayed Vlasov-Fokker-Planck system.

The contraction estimate for two synchronously coupled solutions reads

    d/dt J(t) <= -lambda1 J(t) + lambda2 * sup_{[t-h(t), t]} J,

and the Halanay argument turns it into ``J(t) <= J(0) exp(-lambda t)`` with
``lambda = lambda1 - W(lambda2 H exp(lambda1 H)) / H``.  This module evaluates
all of these quantities, including the principal branch of the Lambert W
function on ``[0, inf)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, NoPositiveRateError, ValidityError

__all__ = [
    "lambert_w0",
    "halanay_rate",
    "lambdas",
    "overall_rate",
    "eta_bar",
    "hypocoercive_rate",
    "optimal_gamma",
    "optimal_b",
    "RateParameters",
    "RateDerivation",
    "derivation_constants",
    "lambda1_general",
]

_LOG_SWITCH = 700.0


def _halley_w(z: float) -> float:
    w = math.log1p(z)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def _bisect_w(z: float) -> float:
    # W(z) <= log(1 + z) on z >= 0
    lo, hi = 0.0, max(1.0, math.log1p(z))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < z:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _w_from_log(log_z: float) -> float:
    """W(exp(log_z)) for arguments too large to exponentiate (log_z > 1)."""
    w = log_z - math.log(log_z)
    for _ in range(100):
        f = w + math.log(w) - log_z
        dw = f / (1.0 + 1.0 / w)
        w -= dw
        if abs(dw) <= 1e-15 * w:
            break
    return w


def lambert_w0(z):
    """Principal branch W0 of the Lambert W function for ``z >= 0``.

    Solves ``w * exp(w) = z`` by Halley iteration started at ``log(1 + z)``,
    falling back to bisection if the iteration does not meet the residual
    tolerance.  Scalars in, float out; arrays are mapped elementwise.
    """
    if np.ndim(z) > 0:
        return np.array([lambert_w0(float(v)) for v in np.ravel(z)]).reshape(np.shape(z))
    z = float(z)
    if math.isnan(z):
        raise DomainError("lambert_w0 argument is NaN")
    if z < 0:
        raise DomainError(f"lambert_w0 is only implemented for z >= 0, got {z!r}")
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf
    if z > 1e300:
        return _w_from_log(math.log(z))
    w = _halley_w(z)
    if not (math.isfinite(w) and abs(w * math.exp(w) - z) <= 1e-13 * max(1.0, z)):
        w = _bisect_w(z)
    return w


def halanay_rate(a: float, b: float, H: float) -> float:
    """Unique root of ``-a + lam + b exp(lam H) = 0``.

    ``H = 0`` returns the limit ``a - b`` and ``H = inf`` returns 0.
    Requires ``a > b >= 0``.
    """
    a, b, H = float(a), float(b), float(H)
    if b < 0 or not a > b:
        raise NoPositiveRateError(f"need a > b >= 0, got a={a}, b={b}")
    if H < 0:
        raise DomainError(f"H must be nonnegative, got {H}")
    if H == 0.0:
        return a - b
    if math.isinf(H):
        return 0.0
    if b == 0.0:
        return a
    log_z = math.log(b) + math.log(H) + a * H
    w = _w_from_log(log_z) if log_z > _LOG_SWITCH else lambert_w0(math.exp(log_z))
    lam = a - w / H
    # Newton polish on the characteristic equation (strictly increasing in lam)
    for _ in range(3):
        e = math.exp(lam * H)
        f = -a + lam + b * e
        step = f / (1.0 + b * H * e)
        lam -= step
        if abs(step) <= 1e-17 * max(1.0, abs(lam)):
            break
    return min(max(lam, 0.0), a)


def lambdas(gamma: float, eta: float) -> tuple[float, float]:
    """Rates (lambda1, lambda2) of the delayed differential inequality.

    Valid for ``0 <= eta < gamma / (1 + gamma)`` with the quadratic form
    ``a = b + gamma``, ``b = 2 / gamma``.
    """
    gamma, eta = float(gamma), float(eta)
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if eta < 0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    if eta >= gamma / (1.0 + gamma):
        raise ValidityError(
            f"eta={eta} violates eta < gamma/(1+gamma) = {gamma / (1 + gamma)}"
        )
    g2 = 4.0 + gamma * gamma
    lam1 = (
        gamma
        - (1.0 + 2.0 * gamma / g2) * eta
        - (gamma / g2) * math.sqrt(4.0 * eta * eta + g2 * (gamma - eta) ** 2)
    )
    lam2 = (2.0 + gamma) ** 2 / ((1.0 + gamma) * g2) * eta / 2.0
    return lam1, lam2


def overall_rate(gamma: float, eta: float, H: float) -> float:
    lam1, lam2 = lambdas(gamma, eta)
    if lam1 <= lam2:
        raise NoPositiveRateError(
            f"lambda1={lam1} <= lambda2={lam2} at gamma={gamma}, eta={eta}"
        )
    return halanay_rate(lam1, lam2, H)


def eta_bar(gamma: float) -> float:
    """Admissible interaction strength ``2 gamma / (3 + 3 gamma)``.

    A simple bound lying strictly inside the region where ``lambda1 > lambda2``.
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    return 2.0 * gamma / (3.0 * (1.0 + gamma))


def hypocoercive_rate(gamma):
    """Decay rate without interaction: ``gamma (1 - gamma / sqrt(4 + gamma^2))``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0):
        raise DomainError("gamma must be positive")
    out = g * (1.0 - np.sqrt(g * g / (4.0 + g * g)))
    return float(out) if out.ndim == 0 else out


def optimal_gamma() -> float:
    """Friction maximizing the non-interacting rate, ``sqrt(2 (sqrt 5 - 1))``."""
    return math.sqrt(2.0 * (math.sqrt(5.0) - 1.0))


def optimal_b(gamma: float) -> float:
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    return 2.0 / gamma


@dataclass(frozen=True)
class RateParameters:
    gamma: float
    eta: float
    H: float = 0.0
    b: float | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")
        if self.eta < 0:
            raise DomainError("eta must be nonnegative")
        if self.H < 0:
            raise DomainError("H must be nonnegative")
        if self.b is None:
            object.__setattr__(self, "b", 2.0 / self.gamma)

    @property
    def flags(self) -> dict[str, bool]:
        g, e, b = self.gamma, self.eta, self.b
        upper_b = math.inf if e == 0 else 2.0 * (1.0 - e) / e
        return {
            "eta_positive_form": e < 1.0 + g - math.sqrt(1.0 + g * g),
            "b_interval": 2.0 / (2.0 * g - e) < b < upper_b if 2 * g > e else False,
            "lambdas_positive": e < g / (1.0 + g),
            "eta_le_eta_bar": e <= eta_bar(g),
        }

    @property
    def valid(self) -> bool:
        return all(self.flags.values())


@dataclass(frozen=True)
class RateDerivation:
    """Intermediate constants of the contraction proof for given (b, gamma, eta).

    ``lambda1`` and ``lambda2`` use the printed general-b expressions.  When
    ``b == 2/gamma`` the closed forms from :func:`lambdas` are attached and the
    difference is reported in ``discrepancy``; nothing is silently corrected.
    """

    b: float
    gamma: float
    eta: float
    a: float
    delta: tuple[float, float, float, float]
    d1: float
    d2: float
    d3: float
    d4: float
    epsilon: float
    lambda1: float
    lambda2: float
    # (1 - eps) - (1 - d3 - 1/eps) d2^2, the relation as printed
    eps_residual_printed: float
    # (1 - eps) - (1 + d3 - 1/eps) d2^2, the relation the eps formula solves
    eps_residual_plus: float
    # positive root of the printed relation, for comparison with ``epsilon``
    eps_printed_root: float
    lambda1_closed: float | None = None
    lambda2_closed: float | None = None

    @property
    def discrepancy(self) -> tuple[float, float] | None:
        if self.lambda1_closed is None:
            return None
        return (self.lambda1 - self.lambda1_closed, self.lambda2 - self.lambda2_closed)


def _check_derivation_validity(b, gamma, eta):
    if not b * (b + gamma) > 1.0:
        raise ValidityError(f"b(b+gamma) > 1 fails: b={b}, gamma={gamma}")
    if not (2.0 + b) * eta < 2.0:
        raise ValidityError(f"(2+b) eta < 2 fails: b={b}, eta={eta}")
    if not 2.0 * b * gamma > 2.0 + b * eta:
        raise ValidityError(f"2 b gamma > 2 + b eta fails: b={b}, gamma={gamma}, eta={eta}")


def derivation_constants(b: float, gamma: float, eta: float) -> RateDerivation:
    b, gamma, eta = float(b), float(gamma), float(eta)
    if gamma <= 0 or b <= 0 or eta < 0:
        raise DomainError("need b > 0, gamma > 0, eta >= 0")
    _check_derivation_validity(b, gamma, eta)
    a = b + gamma
    d1 = (2.0 - (2.0 + b) * eta) / a
    d2 = 1.0 / math.sqrt(b * a - 1.0)
    d3 = a * (2.0 * b * gamma - 2.0 - b * eta) / d1
    d4 = (1.0 + b) ** 2 / ((2.0 + b) * a) * eta / 2.0
    s = 1.0 - (1.0 + d3) * d2 * d2
    root = math.sqrt(4.0 * d2 * d2 + s * s)
    eps = 0.5 * (s + root)
    lam1 = 0.5 * d1 * (1.0 + (1.0 + d3) * d2 * d2 - root)
    lam2 = d4 * (1.0 + d2 * d2)
    res_printed = (1.0 - eps) - (1.0 - d3 - 1.0 / eps) * d2 * d2
    res_plus = (1.0 - eps) - (1.0 + d3 - 1.0 / eps) * d2 * d2
    sp = 1.0 - (1.0 - d3) * d2 * d2
    eps_printed = 0.5 * (sp + math.sqrt(sp * sp + 4.0 * d2 * d2))

    closed1 = closed2 = None
    if math.isclose(b, 2.0 / gamma, rel_tol=1e-12) and eta < gamma / (1.0 + gamma):
        closed1, closed2 = lambdas(gamma, eta)
    return RateDerivation(
        b=b, gamma=gamma, eta=eta, a=a, delta=(1.0, 2.0 + b, 1.0, 1.0),
        d1=d1, d2=d2, d3=d3, d4=d4, epsilon=eps, lambda1=lam1, lambda2=lam2,
        eps_residual_printed=res_printed, eps_residual_plus=res_plus,
        eps_printed_root=eps_printed,
        lambda1_closed=closed1, lambda2_closed=closed2,
    )


def lambda1_general(b: float, gamma: float, eta: float = 0.0) -> float:
    """lambda1 as a function of the quadratic-form parameter ``b``."""
    return derivation_constants(b, gamma, eta).lambda1
