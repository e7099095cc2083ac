"""Stationary state: Maxwellian in velocity times a self-consistent spatial density.

With velocity variance ``theta^2 = sigma / gamma`` the spatial density solves

    rho = exp(-(Phi + U * rho) / theta^2) / Z,

which is solved here by damped fixed-point iteration on a uniform grid.  For
even ``U`` it minimises the free energy

    F(rho) = int theta^2 (log rho - 1) rho + int Phi rho + 1/2 int (U * rho) rho.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import ConvergenceError, DomainError, InvalidInputError
from .model import DriftModel
from .simulator import SimConfig, run

__all__ = [
    "GridSpec",
    "DensityGrid",
    "StationaryResult",
    "maxwellian",
    "convolve",
    "fixed_point_rho",
    "free_energy",
    "sample_stationary",
    "StationarityReport",
    "verify_stationarity",
]

_DIRECT_MAX = 256


@dataclass(frozen=True)
class GridSpec:
    """Nodes ``-L + k delta``, ``k = 0..M-1``, on each of ``dim`` axes."""

    L: float
    M: int
    dim: int = 1

    def __post_init__(self):
        if not self.L > 0 or self.M < 3:
            raise InvalidInputError("grid needs L > 0 and at least 3 nodes")
        if self.dim not in (1, 2):
            raise InvalidInputError("grid solver supports dimension 1 or 2")

    @classmethod
    def from_delta(cls, L: float, delta: float, dim: int = 1) -> "GridSpec":
        return cls(L, int(round(2 * L / delta)) + 1, dim)

    @property
    def delta(self) -> float:
        return 2 * self.L / (self.M - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.M)

    @property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(M,)*dim + (dim,)``."""
        ax = self.axis
        if self.dim == 1:
            return ax[:, None]
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    @property
    def weight(self) -> float:
        return self.delta ** self.dim


@dataclass(frozen=True)
class DensityGrid:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values < 0):
            raise InvalidInputError("density has negative values")

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.weight)

    def normalized(self) -> "DensityGrid":
        return DensityGrid(self.grid, self.values / self.mass)


@dataclass(frozen=True)
class StationaryResult:
    rho: DensityGrid
    theta: float
    residual: float
    free_energy: float
    iterations: int


def maxwellian(v, theta2: float):
    """Gaussian velocity density with variance ``theta2`` per component."""
    if not theta2 > 0:
        raise DomainError("theta^2 must be positive")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = v.shape[-1]
    out = (2 * math.pi * theta2) ** (-d / 2) * np.exp(-np.sum(v * v, axis=-1) / (2 * theta2))
    return float(out) if out.ndim == 0 else out


def _kernel(grid: GridSpec, U):
    """``U`` on all node offsets, shape ``(2M-1,)*dim``."""
    off = np.arange(-(grid.M - 1), grid.M) * grid.delta
    if grid.dim == 1:
        pts = off[:, None]
    else:
        gx, gy = np.meshgrid(off, off, indexing="ij")
        pts = np.stack([gx, gy], axis=-1)
    return np.asarray(U(pts), dtype=float)


def convolve(grid: GridSpec, kernel: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``(U * rho)(x_i) = sum_j U(x_i - x_j) rho_j delta^dim`` on the nodes."""
    M = grid.M
    if grid.dim == 1 and M <= _DIRECT_MAX:
        idx = np.arange(M)
        mat = kernel[idx[:, None] - idx[None, :] + M - 1]
        out = mat @ rho
    else:
        full = fftconvolve(rho, kernel, mode="full")
        sl = tuple(slice(M - 1, 2 * M - 1) for _ in range(grid.dim))
        out = full[sl]
    return out * grid.weight


def _gibbs(E: np.ndarray, weight: float) -> np.ndarray:
    # shift by the minimum so that Z cannot underflow
    w = np.exp(-(E - E.min()))
    return w / (w.sum() * weight)


def fixed_point_rho(grid: GridSpec, Phi: Callable, U: Callable | None, theta2: float,
                    damping: float = 0.5, tol: float = 1e-12, max_iter: int = 10_000,
                    edge_tol: float = 1e-6) -> StationaryResult:
    """Damped iteration ``rho <- (1 - damping) rho + damping T(rho)`` until ``sup|rho - T(rho)| <= tol``.

    The returned density is the last ``T(rho)``.  Raises
    :class:`ConvergenceError` after ``max_iter`` sweeps and
    :class:`DomainError` when the density at the box edge exceeds
    ``edge_tol`` times its maximum (box too small).
    """
    if not theta2 > 0:
        raise DomainError("theta^2 must be positive")
    if not 0 < damping <= 1:
        raise InvalidInputError("damping must lie in (0, 1]")
    pts = grid.points
    phi = np.asarray(Phi(pts), dtype=float)
    kern = None if U is None else _kernel(grid, U)
    wt = grid.weight

    def T(rho):
        E = phi if kern is None else phi + convolve(grid, kern, rho)
        return _gibbs(E / theta2, wt)

    rho = _gibbs(phi / theta2, wt)
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = T(rho)
        residual = float(np.max(np.abs(new - rho)))
        if residual <= tol:
            rho = new
            break
        rho = (1 - damping) * rho + damping * new
        rho = rho / (rho.sum() * wt)
    else:
        raise ConvergenceError(f"fixed point not reached after {max_iter} iterations, "
                               f"residual {residual:.3e}", residual=residual)

    edge = _edge_max(rho, grid.dim)
    if edge > edge_tol * rho.max():
        raise DomainError(f"box too small: edge density {edge:.3e} vs peak {rho.max():.3e}")
    dens = DensityGrid(grid, rho)
    F = free_energy(dens, Phi, U, theta2)
    return StationaryResult(dens, math.sqrt(theta2), residual, F, it)


def _edge_max(rho, dim):
    if dim == 1:
        return max(rho[0], rho[-1])
    return max(rho[0].max(), rho[-1].max(), rho[:, 0].max(), rho[:, -1].max())


def free_energy(rho: DensityGrid, Phi: Callable, U: Callable | None, theta2: float) -> float:
    vals = np.asarray(rho.values, dtype=float)
    if np.any(vals < 0):
        raise InvalidInputError("density has negative values")
    grid = rho.grid
    w = grid.weight
    pos = vals > 0
    entropy = np.zeros_like(vals)
    entropy[pos] = vals[pos] * (np.log(vals[pos]) - 1.0)
    total = theta2 * entropy.sum() + (np.asarray(Phi(grid.points)) * vals).sum()
    if U is not None:
        total += 0.5 * (convolve(grid, _kernel(grid, U), vals) * vals).sum()
    return float(total * w)


def sample_stationary(result: StationaryResult, n: int, rng: np.random.Generator):
    """Draw ``n`` phase-space points from Maxwellian(theta^2) x rho.

    Positions: a grid cell is chosen with probability ``rho_k delta^dim`` and
    the point is placed uniformly in the cell around the node.
    """
    grid = result.rho.grid
    p = result.rho.values.ravel()
    p = p / p.sum()
    idx = rng.choice(p.size, size=n, p=p)
    nodes = grid.points.reshape(-1, grid.dim)[idx]
    X = nodes + (rng.random((n, grid.dim)) - 0.5) * grid.delta
    V = result.theta * rng.standard_normal((n, grid.dim))
    return X, V


@dataclass
class StationarityReport:
    moments0: dict
    moments1: dict
    z_scores: dict
    velocity_variance: float
    velocity_variance_z: float
    n_sigma: float

    @property
    def passed(self) -> bool:
        return (all(abs(z) <= self.n_sigma for z in self.z_scores.values())
                and abs(self.velocity_variance_z) <= self.n_sigma)


def _moments(X, V):
    """Per-moment (estimate, standard error) pairs, averaged over components."""
    n = X.shape[0]
    out = {}
    for name, s in (("mean_x", X), ("mean_v", V)):
        out[name] = (float(s.mean()), float(s.std(ddof=1) / math.sqrt(n * s.shape[1])))
    for name, a, b in (("var_x", X, X), ("var_v", V, V), ("cov_xv", X, V)):
        prod = (a - a.mean(0)) * (b - b.mean(0))
        out[name] = (float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(prod.size)))
    return out


def verify_stationarity(result: StationaryResult, model: DriftModel, config: SimConfig,
                        n_sigma: float = 3.0) -> StationarityReport:
    """Start the particle system in the computed stationary state and measure moment drift.

    Each moment's drift between ``t = 0`` and ``t = config.t_final`` is
    divided by the combined Monte Carlo standard error of the two estimates.
    The final velocity variance is also compared with ``theta^2``.
    """
    if not model.sigma > 0:
        raise DomainError("stationarity check needs sigma > 0")
    if not math.isclose(model.theta2, result.theta ** 2, rel_tol=1e-9):
        raise InvalidInputError(f"model sigma/gamma = {model.theta2} differs from "
                                f"theta^2 = {result.theta ** 2}")
    if model.d != result.rho.grid.dim:
        raise InvalidInputError("model and grid dimensions differ")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 7]))
    X0, V0 = sample_stationary(result, config.n, rng)
    res = run(config, model, (X0, V0), functionals={}, keep_snapshots=False)
    m0 = _moments(X0, V0)
    m1 = _moments(res.final.X, res.final.V)
    z = {k: (m1[k][0] - m0[k][0]) / math.hypot(m0[k][1], m1[k][1]) for k in m0}
    var_v, se_v = m1["var_v"]
    return StationarityReport(
        {k: v[0] for k, v in m0.items()}, {k: v[0] for k, v in m1.items()}, z,
        var_v, (var_v - result.theta ** 2) / se_v, n_sigma,
    )
