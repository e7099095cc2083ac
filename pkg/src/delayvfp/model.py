"""Drift and interaction functions of the particle system.

Velocities evolve as

    dV = [A(X) + <B(X, .)>_delay - gamma V] dt + sqrt(2 sigma) dW,

with confinement ``A(x) = -alpha x + g(x)`` and pairwise interaction
``B(x, xh)``.  For potentials, ``A = -grad Phi`` and ``B(x, xh) = -grad U(x - xh)``.

All callables act on the last axis of broadcastable ``(..., d)`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .exceptions import ConfigError, DomainError, InvalidInputError

__all__ = [
    "AffineInteraction",
    "DriftModel",
    "PotentialInstance",
    "eval_A",
    "eval_B",
    "rescale_time",
    "audit_lipschitz",
    "audit_gradients",
    "builtin_potential",
    "linear_model",
    "model_from_mapping",
    "MODEL_KEYS",
]

VectorField = Callable[[np.ndarray], np.ndarray]
Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _zero_field(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_kernel(x, xh):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(xh)))


@dataclass(frozen=True)
class AffineInteraction:
    """``B(x, xh) = p x + q xh``.

    The simulator recognises this type and averages the interaction through
    the ensemble mean instead of summing over pairs.
    """

    p: float
    q: float

    def __call__(self, x, xh):
        return self.p * np.asarray(x, dtype=float) + self.q * np.asarray(xh, dtype=float)

    @property
    def lipschitz(self) -> float:
        return max(abs(self.p), abs(self.q))

    def scaled(self, factor: float) -> "AffineInteraction":
        return AffineInteraction(self.p * factor, self.q * factor)


class _ScaledField:
    def __init__(self, fn, factor):
        self.fn, self.factor = fn, factor

    def __call__(self, *args):
        return self.factor * self.fn(*args)


@dataclass(frozen=True)
class DriftModel:
    d: int = 1
    alpha: float = 1.0
    g: VectorField | None = None
    c_g: float = 0.0
    B: Kernel | None = None
    c_B: float = 0.0
    gamma: float = 1.0
    sigma: float = 0.0
    H: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.sigma < 0 or self.c_g < 0 or self.c_B < 0:
            raise DomainError("sigma, c_g and c_B must be nonnegative")
        if not self.H >= 0:
            raise DomainError(f"cut-off H must lie in [0, inf], got {self.H}")

    @property
    def eta(self) -> float:
        return self.c_g + 2.0 * self.c_B

    @property
    def theta2(self) -> float:
        """Velocity variance of the stationary Maxwellian, sigma / gamma."""
        return self.sigma / self.gamma

    @property
    def has_interaction(self) -> bool:
        return self.B is not None

    @property
    def affine(self) -> AffineInteraction | None:
        return self.B if isinstance(self.B, AffineInteraction) else None

    def A(self, x):
        x = np.asarray(x, dtype=float)
        out = -self.alpha * x
        if self.g is not None:
            out = out + self.g(x)
        return out

    def interaction(self, x, xh):
        if self.B is None:
            return _zero_kernel(x, xh)
        return self.B(x, xh)

    def with_(self, **changes) -> "DriftModel":
        return replace(self, **changes)


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("input contains non-finite values")


def eval_A(model: DriftModel, x):
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    return model.A(x)


def eval_B(model: DriftModel, x, xh):
    x = np.asarray(x, dtype=float)
    xh = np.asarray(xh, dtype=float)
    _check_finite(x, xh)
    return model.interaction(x, xh)


def rescale_time(model: DriftModel) -> DriftModel:
    """Equivalent model with ``alpha = 1`` under ``tau = sqrt(alpha) t``.

    Positions are unchanged and velocities map to ``V / sqrt(alpha)``.  Then
    ``g -> g / alpha``, ``B -> B / alpha``, ``gamma -> gamma / sqrt(alpha)``,
    ``H -> sqrt(alpha) H`` and ``sigma -> sigma alpha^(-3/2)``, the last
    because the Brownian increment scales as ``alpha^(-1/4)`` in the new clock.
    """
    a = model.alpha
    if a == 1.0:
        return model
    s = math.sqrt(a)
    g = None if model.g is None else _ScaledField(model.g, 1.0 / a)
    if model.B is None:
        B = None
    elif isinstance(model.B, AffineInteraction):
        B = model.B.scaled(1.0 / a)
    else:
        B = _ScaledField(model.B, 1.0 / a)
    return replace(
        model,
        alpha=1.0,
        g=g,
        c_g=model.c_g / a,
        B=B,
        c_B=model.c_B / a,
        gamma=model.gamma / s,
        sigma=model.sigma * a ** -1.5,
        H=model.H * s,
    )


def audit_lipschitz(model: DriftModel, box: float = 5.0, n_pairs: int = 10_000,
                    seed: int = 0, rtol: float = 1e-9) -> dict:
    """Sample two-point quotients of ``g`` and ``B`` and compare with the declared constants.

    Returns the observed maxima; raises :class:`DomainError` if either
    exceeds its declared constant by more than ``rtol`` relative.
    """
    rng = np.random.default_rng(seed)
    d = model.d
    x, y, xh, yh = (rng.uniform(-box, box, size=(n_pairs, d)) for _ in range(4))
    out = {"g": 0.0, "B": 0.0}
    if model.g is not None:
        num = np.linalg.norm(model.g(x) - model.g(y), axis=-1)
        den = np.linalg.norm(x - y, axis=-1)
        out["g"] = float(np.max(num / den))
        if out["g"] > model.c_g * (1 + rtol):
            raise DomainError(f"g Lipschitz quotient {out['g']} exceeds declared c_g={model.c_g}")
    if model.B is not None:
        Bxx = model.B(x, xh)
        num = (np.linalg.norm(Bxx - model.B(y, xh), axis=-1)
               + np.linalg.norm(Bxx - model.B(x, yh), axis=-1))
        den = np.linalg.norm(x - y, axis=-1) + np.linalg.norm(xh - yh, axis=-1)
        out["B"] = float(np.max(num / den))
        if out["B"] > model.c_B * (1 + rtol):
            raise DomainError(f"B Lipschitz quotient {out['B']} exceeds declared c_B={model.c_B}")
    return out


@dataclass(frozen=True)
class PotentialInstance:
    """Confinement ``Phi`` and interaction ``U`` with analytic gradients.

    ``g`` is the non-harmonic remainder ``-grad Phi + alpha x`` with declared
    Lipschitz constant ``c_g``; ``c_U`` bounds the Hessian of ``U``.
    """

    Phi: Callable[[np.ndarray], np.ndarray]
    grad_Phi: VectorField
    U: Callable[[np.ndarray], np.ndarray] | None = None
    grad_U: VectorField | None = None
    U_even: bool = True
    alpha: float = 1.0
    c_g: float = 0.0
    c_U: float = 0.0
    affine_U: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def U_or_zero(self, x):
        x = np.asarray(x, dtype=float)
        if self.U is None:
            return np.zeros(x.shape[:-1])
        return self.U(x)

    def to_model(self, d: int = 1, gamma: float = 1.0, sigma: float = 0.0,
                 H: float = 0.0) -> DriftModel:
        alpha = self.alpha
        grad_Phi = self.grad_Phi

        def g(x):
            return -grad_Phi(x) + alpha * x

        g_fn = None if self.c_g == 0.0 else g
        if self.grad_U is None:
            B = None
        elif self.affine_U is not None:
            B = AffineInteraction(-self.affine_U, self.affine_U)
        else:
            grad_U = self.grad_U

            def B(x, xh):
                return -grad_U(np.asarray(x, dtype=float) - np.asarray(xh, dtype=float))

        return DriftModel(d=d, alpha=alpha, g=g_fn, c_g=self.c_g, B=B,
                          c_B=self.c_U if B is not None else 0.0,
                          gamma=gamma, sigma=sigma, H=H, name=self.name)


def audit_gradients(pot: PotentialInstance, d: int = 2, n_points: int = 200,
                    box: float = 3.0, step: float = 1e-5, rtol: float = 1e-6,
                    seed: int = 0) -> float:
    """Central-difference check of both analytic gradients; returns the worst relative error."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(n_points, d))
    worst = 0.0
    pairs = [(pot.Phi, pot.grad_Phi)]
    if pot.U is not None:
        pairs.append((pot.U, pot.grad_U))
    for fn, grad in pairs:
        num = np.empty_like(pts)
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            num[:, k] = (fn(pts + e) - fn(pts - e)) / (2 * step)
        an = grad(pts)
        err = np.abs(num - an) / np.maximum(1.0, np.abs(an))
        worst = max(worst, float(err.max()))
    if worst > rtol:
        raise DomainError(f"finite-difference gradient mismatch {worst:.3e} > {rtol}")
    return worst


# built-in potentials; these are library choices, not taken from any experiment

def _sq(x):
    return np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)


def _quadratic_U(k):
    return (lambda x: 0.5 * k * _sq(x)), (lambda x: k * np.asarray(x, dtype=float))


def _gaussian_U(k, ell):
    # U(x) = k ell^2 (1 - exp(-|x|^2 / 2 ell^2)); |Hess U| <= k
    def U(x):
        return k * ell * ell * (1.0 - np.exp(-_sq(x) / (2 * ell * ell)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        return k * x * np.exp(-_sq(x) / (2 * ell * ell))[..., None]

    return U, grad


def builtin_potential(name: str = "quadratic", alpha: float = 1.0, interaction: str = "none",
                      k: float = 0.0, cos_amp: float = 0.1, quartic: float = 0.25,
                      ell: float = 1.0) -> PotentialInstance:
    """Named potential pairs.

    Confinement ``name``: ``quadratic`` (alpha|x|^2/2), ``quadratic+cosine``
    (adds ``cos_amp cos(x_1)``, so ``g = cos_amp sin(x_1) e_1``) or ``quartic``
    (adds ``quartic |x|^4 / 4``; its remainder is not globally Lipschitz and
    ``c_g`` is reported as infinite).  Interaction: ``none``, ``quadratic``
    (``k|x|^2/2``, an affine kernel) or ``gaussian`` (bounded well of depth
    ``k ell^2``).
    """
    if name == "quadratic":
        def Phi(x):
            return 0.5 * alpha * _sq(x)

        def grad_Phi(x):
            return alpha * np.asarray(x, dtype=float)
        c_g = 0.0
    elif name == "quadratic+cosine":
        def Phi(x):
            x = np.asarray(x, dtype=float)
            return 0.5 * alpha * _sq(x) + cos_amp * np.cos(x[..., 0])

        def grad_Phi(x):
            x = np.asarray(x, dtype=float)
            out = alpha * x
            out[..., 0] -= cos_amp * np.sin(x[..., 0])
            return out
        c_g = abs(cos_amp)
    elif name == "quartic":
        def Phi(x):
            s = _sq(x)
            return 0.5 * alpha * s + 0.25 * quartic * s * s

        def grad_Phi(x):
            x = np.asarray(x, dtype=float)
            return alpha * x + quartic * _sq(x)[..., None] * x
        c_g = math.inf if quartic else 0.0
    else:
        raise ConfigError(f"unknown potential {name!r}", key="model.potential")

    affine = None
    if interaction == "none" or k == 0.0:
        U = grad_U = None
        c_U = 0.0
    elif interaction == "quadratic":
        U, grad_U = _quadratic_U(k)
        c_U, affine = abs(k), k
    elif interaction == "gaussian":
        U, grad_U = _gaussian_U(k, ell)
        c_U = abs(k)
    else:
        raise ConfigError(f"unknown interaction {interaction!r}", key="model.interaction")

    return PotentialInstance(
        Phi=Phi, grad_Phi=grad_Phi, U=U, grad_U=grad_U, U_even=True, alpha=alpha,
        c_g=c_g, c_U=c_U, affine_U=affine, name=name,
        params=dict(name=name, alpha=alpha, interaction=interaction, k=k,
                    cos_amp=cos_amp, quartic=quartic, ell=ell),
    )


def linear_model(c: float, d: int = 1, gamma: float = 1.0, sigma: float = 0.0,
                 H: float = 0.0, alpha: float = 1.0) -> DriftModel:
    """Harmonic confinement with the affine kernel ``B(x, xh) = -c (x - xh)``.

    Its interaction strength is ``eta = 2c``.
    """
    B = AffineInteraction(-c, c) if c else None
    return DriftModel(d=d, alpha=alpha, B=B, c_B=abs(c), gamma=gamma, sigma=sigma,
                      H=H, name="linear")


MODEL_KEYS = {
    "potential": str, "interaction": str, "alpha": float, "k": float,
    "cos_amp": float, "quartic": float, "ell": float, "d": int,
    "gamma": float, "sigma": float,
}

MODEL_DEFAULTS = {
    "potential": "quadratic", "interaction": "none", "alpha": 1.0, "k": 0.0,
    "cos_amp": 0.1, "quartic": 0.25, "ell": 1.0, "d": 1, "gamma": 1.0, "sigma": 1.0,
}


def model_from_mapping(values: dict, H: float = 0.0) -> tuple[DriftModel, PotentialInstance]:
    """Build a model from ``model.*`` config values (keys without the prefix)."""
    unknown = set(values) - set(MODEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown model key(s): {sorted(unknown)}", key=sorted(unknown)[0])
    v = {**MODEL_DEFAULTS, **values}
    pot = builtin_potential(v["potential"], alpha=v["alpha"], interaction=v["interaction"],
                            k=v["k"], cos_amp=v["cos_amp"], quartic=v["quartic"], ell=v["ell"])
    return pot.to_model(d=v["d"], gamma=v["gamma"], sigma=v["sigma"], H=H), pot
