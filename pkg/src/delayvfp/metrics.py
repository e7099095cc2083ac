"""Wasserstein-type distances between empirical phase-space measures.

Clouds are ``(N, 2d)`` arrays whose rows are ``z = (x, v)``.  The quadratic
form ``Q(z) = a|x|^2 + 2<x, v> + b|v|^2`` with ``ab > 1`` is equivalent to the
Euclidean norm, ``p|z|^2 <= Q(z) <= q|z|^2``, and factors as ``Q(z) = |Sz|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import DomainError, InvalidInputError

__all__ = [
    "QuadraticForm",
    "FormFactorization",
    "Q_eval",
    "equivalence_constants",
    "theorem_form",
    "dist2_exact",
    "distQ_exact",
    "distQ_coupled_upper",
    "DistQ",
    "MAX_EXACT_N",
]

MAX_EXACT_N = 512


@dataclass(frozen=True)
class FormFactorization:
    M_Q: np.ndarray
    S: np.ndarray


@dataclass(frozen=True)
class QuadraticForm:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"a and b must be positive, got a={self.a}, b={self.b}")
        if not self.a * self.b > 1.0:
            raise DomainError(f"quadratic form needs ab > 1, got ab={self.a * self.b}")

    @cached_property
    def pq(self) -> tuple[float, float]:
        a, b = self.a, self.b
        r = math.sqrt(4.0 + (b - a) ** 2)
        return 0.5 * ((a + b) - r), 0.5 * ((a + b) + r)

    def factorization(self, d: int) -> FormFactorization:
        a, b = self.a, self.b
        eye = np.eye(d)
        zero = np.zeros((d, d))
        M = np.block([[a * eye, eye], [eye, b * eye]])
        S = np.block([[a * eye, eye], [zero, math.sqrt(a * b - 1.0) * eye]]) / math.sqrt(a)
        return FormFactorization(M_Q=M, S=S)

    def transform(self, z):
        """Apply ``S`` blockwise to the last axis of ``z`` (length 2d)."""
        z = np.asarray(z, dtype=float)
        d = _half_dim(z)
        x, v = z[..., :d], z[..., d:]
        sa = math.sqrt(self.a)
        return np.concatenate([sa * x + v / sa, math.sqrt(self.a * self.b - 1.0) / sa * v], axis=-1)

    def __call__(self, z):
        return Q_eval(self, z)


def _half_dim(z: np.ndarray) -> int:
    n = z.shape[-1]
    if n % 2:
        raise InvalidInputError(f"phase-space vectors need even length, got {n}")
    return n // 2


def Q_eval(form: QuadraticForm, z):
    """Evaluate the form on the last axis of ``z``."""
    z = np.asarray(z, dtype=float)
    d = _half_dim(z)
    x, v = z[..., :d], z[..., d:]
    out = (
        form.a * np.sum(x * x, axis=-1)
        + 2.0 * np.sum(x * v, axis=-1)
        + form.b * np.sum(v * v, axis=-1)
    )
    return float(out) if np.ndim(out) == 0 else out


def equivalence_constants(form_or_a, b: float | None = None) -> tuple[float, float]:
    if isinstance(form_or_a, QuadraticForm):
        return form_or_a.pq
    return QuadraticForm(float(form_or_a), float(b)).pq


def theorem_form(gamma: float, b: float | None = None) -> QuadraticForm:
    """The form used in the contraction estimate: ``a = b + gamma``, ``b = 2/gamma``."""
    if b is None:
        b = 2.0 / gamma
    return QuadraticForm(b + gamma, b)


def _check_pair(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape:
        raise InvalidInputError(f"cloud shapes differ: {A.shape} vs {B.shape}")
    return A, B


def _sq_cost(A, B):
    # |a - b|^2 via expansion would lose precision for nearby points
    # coordinates are accumulated in order so the rounding is reproducible
    cost = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        d = A[:, None, k] - B[None, :, k]
        cost += d * d
    return cost


def _assignment_mean(cost: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(cost)
    # summing in sorted order makes the result independent of argument order
    return float(np.sort(cost[rows, cols]).sum() / cost.shape[0])


def dist2_exact(cloud_a, cloud_b) -> float:
    """Exact W2 distance between two uniform empirical measures of equal size."""
    A, B = _check_pair(cloud_a, cloud_b)
    if A.shape[0] > MAX_EXACT_N:
        raise InvalidInputError(f"exact assignment is capped at N={MAX_EXACT_N}")
    return math.sqrt(max(_assignment_mean(_sq_cost(A, B)), 0.0))


@dataclass(frozen=True)
class DistQ:
    """``squared`` is the infimum of E[Q(Z - Z')]; ``root`` its square root."""

    squared: float

    @property
    def root(self) -> float:
        return math.sqrt(self.squared)


def distQ_exact(cloud_a, cloud_b, form: QuadraticForm) -> DistQ:
    A, B = _check_pair(cloud_a, cloud_b)
    if A.shape[0] > MAX_EXACT_N:
        raise InvalidInputError(f"exact assignment is capped at N={MAX_EXACT_N}")
    cost = Q_eval(form, A[:, None, :] - B[None, :, :])
    return DistQ(max(_assignment_mean(np.atleast_2d(cost)), 0.0))


def distQ_coupled_upper(cloud_a, cloud_b, form: QuadraticForm) -> float:
    """Mean of ``Q(z_i - z'_i)`` under the index coupling (an upper bound on dist_Q^2)."""
    A, B = _check_pair(cloud_a, cloud_b)
    # same reduction as the assignment, so the bound also holds after rounding
    return float(np.sort(np.atleast_1d(Q_eval(form, A - B))).sum() / A.shape[0])
