"""Numerical counterparts of the comparison arguments.

* :func:`halanay_compare_solve` integrates ``phi' = -a phi + b sup_{[t-H,t]} phi``,
  which ``y0 exp(-lambda (t - t0))`` solves exactly from exponential history.
* :func:`check_inequality` audits a simulated ``J`` trace against the
  delayed differential inequality.
* :func:`picard_iterate` / :func:`picard_converge` run the constructive
  fixed-point scheme: freeze the interaction source, solve the resulting
  linear SDE with fixed noise, repeat.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidInputError, NoPositiveRateError
from .kummer import integro_ode_solve
from .metrics import dist2_exact
from .model import DriftModel
from .rates import halanay_rate
from .simulator import (EnsembleState, HistoryBuffer, SimConfig, _initial, cutoff_h,
                        noise_block, run, step)
from .trace import DecayTrace

__all__ = [
    "halanay_compare_solve",
    "integro_compare_solve",
    "InequalityReport",
    "check_inequality",
    "comparison_ratio",
    "picard_iterate",
    "PicardTrace",
    "picard_converge",
    "static_snapshots",
]


def halanay_compare_solve(a: float, b: float, H: float, y0: float, t0: float,
                          t_final: float, dt: float, method: str = "heun",
                          history: str = "constant") -> DecayTrace:
    """Solve the sup-delay comparison equation on ``[t0, t_final]``.

    ``history="constant"`` uses ``phi = y0`` on ``[t0 - H, t0]``.  The
    exponential ``y0 exp(-lambda (t - t0))`` is an upper solution for that
    problem but solves it exactly only with ``history="exponential"``, i.e.
    ``phi(s) = y0 exp(-lambda (s - t0))`` on the initial interval.

    The window maximum is kept in a monotone deque; the left edge of the
    window is linearly interpolated when it falls between grid points.
    ``method`` is ``"heun"`` (default) or ``"euler"``.
    """
    if b < 0 or not a > b:
        raise NoPositiveRateError(f"need a > b >= 0, got a={a}, b={b}")
    if not H > 0:
        raise InvalidInputError("H must be positive")
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    if dt > H:
        raise InvalidInputError(f"step dt={dt} exceeds the delay H={H}")
    if method not in ("heun", "euler"):
        raise InvalidInputError(f"unknown method {method!r}")
    if history == "constant":
        def initial(s):
            return y0
    elif history == "exponential":
        lam = halanay_rate(a, b, H)

        def initial(s):
            return y0 * math.exp(-lam * (s - t0))
    else:
        raise InvalidInputError(f"unknown history {history!r}")
    n = int(round((t_final - t0) / dt))
    phi = np.empty(n + 1)
    phi[0] = y0
    window: deque[int] = deque()

    def value_at(s, upto):
        # value at time s <= t_upto; both initial histories are nonincreasing,
        # so on [s, t0] the history is largest at s
        if s <= t0:
            return initial(s)
        pos = (s - t0) / dt
        j = min(int(pos), upto - 1)
        f = pos - j
        return (1 - f) * phi[j] + f * phi[j + 1]

    def push(k):
        while window and phi[window[-1]] <= phi[k]:
            window.pop()
        window.append(k)

    def window_sup(t, upto):
        # max over grid points in [t - H, t_upto] and the interpolated left edge
        left = t - H
        while window and t0 + window[0] * dt < left - 1e-12 * dt:
            window.popleft()
        best = phi[window[0]] if window else -math.inf
        return max(best, value_at(left, upto))

    push(0)
    for k in range(n):
        t = t0 + k * dt
        s_k = window_sup(t, k)
        f1 = -a * phi[k] + b * s_k
        pred = phi[k] + dt * f1
        if method == "euler":
            phi[k + 1] = pred
        else:
            t1 = t + dt
            s_pred = max(window_sup(t1, k), pred)
            f2 = -a * pred + b * s_pred
            phi[k + 1] = phi[k] + 0.5 * dt * (f1 + f2)
        push(k + 1)
    times = t0 + dt * np.arange(n + 1)
    return DecayTrace(times, phi, "phi",
                      {"a": a, "b": b, "H": H, "y0": y0, "dt": dt, "history": history})


def integro_compare_solve(lambda1: float, lambda2: float, y0: float, t0: float,
                          t_final: float, dt: float) -> DecayTrace:
    """Comparison function for infinite memory; see :func:`delayvfp.kummer.integro_ode_solve`."""
    return integro_ode_solve(lambda1, lambda2, y0, t0, t_final, dt)


@dataclass
class InequalityReport:
    n_checked: int
    n_violations: int
    max_excess: float
    violation_times: np.ndarray
    residual: np.ndarray
    slack: np.ndarray

    @property
    def fraction(self) -> float:
        return self.n_violations / self.n_checked if self.n_checked else 0.0


def _window_terms(t, v, H, kind):
    """Average (trapezoid) or supremum of ``v`` over ``[t_k - h(t_k), t_k]`` for each k."""
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (v[1:] + v[:-1]))])
    out = np.empty_like(v)
    for k, tk in enumerate(t):
        h = cutoff_h(tk - t[0], H)
        lo = tk - h
        if h == 0:
            out[k] = v[k]
        elif kind == "average":
            out[k] = (cum[k] - np.interp(lo, t, cum)) / h
        else:
            j = np.searchsorted(t, lo)
            out[k] = max(v[j:k + 1].max(), np.interp(lo, t, v))
    return out


def check_inequality(trace: DecayTrace, lambda1: float, lambda2: float, H: float,
                     slack: float | None = None, batches: np.ndarray | None = None,
                     n_sigma: float = 3.0, kind: str = "average") -> InequalityReport:
    """Flag interior times where ``dJ/dt > -lambda1 J + lambda2 <J>_window + slack``.

    ``dJ/dt`` is a centered difference.  With ``batches`` (shape
    ``(len(trace), n_batches)``, batch versions of J), the slack at each time
    is ``n_sigma`` batch-means standard errors of the residual; otherwise the
    constant ``slack`` (default 0) is used.
    """
    t, v = trace.times, trace.values
    if t.size < 3:
        raise InvalidInputError("inequality check needs at least 3 trace points")

    def residual(vals):
        dJ = (vals[2:] - vals[:-2]) / (t[2:] - t[:-2])
        win = _window_terms(t, vals, H, kind)
        return dJ + lambda1 * vals[1:-1] - lambda2 * win[1:-1]

    res = residual(v)
    if batches is not None:
        batches = np.asarray(batches, dtype=float)
        per = np.stack([residual(batches[:, j]) for j in range(batches.shape[1])], axis=1)
        se = per.std(axis=1, ddof=1) / math.sqrt(per.shape[1])
        tol = n_sigma * se
        if slack is not None:
            tol = tol + slack
    else:
        tol = np.full(res.shape, 0.0 if slack is None else float(slack))
    bad = res > tol
    excess = float(np.max(res - tol)) if res.size else 0.0
    return InequalityReport(int(res.size), int(bad.sum()), excess, t[1:-1][bad], res, tol)


def comparison_ratio(trace: DecayTrace, lambda1: float, lambda2: float, H: float) -> float:
    """``max_t J(t) / (J(t0) exp(-lambda (t - t0)))`` with the Halanay rate."""
    lam = halanay_rate(lambda1, lambda2, H)
    t, v = trace.times, trace.values
    ref = v[0] * np.exp(-lam * (t - t[0]))
    return float(np.max(v / ref))


# -- Picard iteration ---------------------------------------------------------

def static_snapshots(config: SimConfig, X0, V0) -> list:
    """The zeroth Picard iterate: the initial ensemble held fixed in time."""
    return [(config.time(k), X0, V0) for k in range(config.n_steps + 1)]


def _frozen_lookup(frozen, config: SimConfig):
    times = np.array([s[0] for s in frozen])
    Xs = np.stack([np.asarray(s[1], dtype=float) for s in frozen])
    T = config.n_steps * config.dt
    if times.size == 0 or times[0] > 1e-9 or times[-1] < T - 1e-9 * max(1.0, T):
        raise InvalidInputError(
            f"frozen snapshots cover [{times[0] if times.size else None}, "
            f"{times[-1] if times.size else None}], need [0, {T}]"
        )
    if np.any(np.diff(times) <= 0):
        raise InvalidInputError("frozen snapshot times must increase")

    def at(t):
        j = int(np.searchsorted(times, t - 1e-12))
        if j < times.size and abs(times[j] - t) <= 1e-9 * max(1.0, config.dt):
            return Xs[j]
        w = (t - times[j - 1]) / (times[j] - times[j - 1])
        return (1 - w) * Xs[j - 1] + w * Xs[j]

    return at


def picard_iterate(config: SimConfig, model: DriftModel, frozen, init) -> list:
    """Solve the SDE with the interaction source frozen to ``frozen``.

    ``frozen`` is a list of ``(t, X, ...)`` snapshots covering ``[0, T]``
    (linearly interpolated between snapshots); only positions are used, as
    the interaction depends on the spatial marginal.  Noise and initial data
    come from ``config.seed`` so every iterate sees the same realisation.
    Returns ``(t, X, V)`` at every step.
    """
    at = _frozen_lookup(frozen, config)
    X0, V0 = _initial(init, config.seed, 1, config.n, model.d)
    state = EnsembleState(0.0, X0, V0, config.seed, model)
    hist = HistoryBuffer(config.dt, model.H, keep_positions=model.affine is None,
                         mode=config.history)
    hist.append(0.0, at(0.0))
    out = [(0.0, state.X.copy(), state.V.copy())]
    for k in range(config.n_steps):
        xi = noise_block(config.seed, k, config.n, model.d) if model.sigma > 0 else None
        state = step(state, hist, config.dt, xi, source_next=at(config.time(k + 1)))
        out.append((state.t, state.X.copy(), state.V.copy()))
    return out


def _sup_index_distance(a, b) -> float:
    best = 0.0
    for (_, Xa, Va), (_, Xb, Vb) in zip(a, b):
        dz = np.sum((Xa - Xb) ** 2, axis=1) + np.sum((Va - Vb) ** 2, axis=1)
        best = max(best, float(dz.mean()))
    return best


@dataclass
class PicardTrace:
    distances: list = field(default_factory=list)
    iterate: list = field(default_factory=list)
    converged: bool = False
    k: int = 0
    exact_final: list = field(default_factory=list)
    direct_distance: float | None = None
    floor: float | None = None


def _subsample(Z, m, seed=0):
    if Z.shape[0] <= m:
        return Z
    idx = np.random.default_rng(seed).choice(Z.shape[0], m, replace=False)
    return Z[np.sort(idx)]


def picard_converge(config: SimConfig, model: DriftModel, init, k_max: int = 10,
                    tol: float = 1e-12, compare_direct: bool = True,
                    exact_n: int = 256) -> PicardTrace:
    """Iterate :func:`picard_iterate` from the static initial ensemble.

    ``distances[k]`` is the sup over time of the index-coupled mean squared
    distance between iterates ``k+1`` and ``k`` (an upper bound on dist_2^2);
    ``exact_final[k]`` is the exact dist_2^2 at the final time on at most
    ``exact_n`` particles.  Stops once a distance drops to ``tol``.  With
    ``compare_direct`` the final iterate is compared with a direct
    self-consistent run on the same seed, and the floor is the distance
    between two direct runs on different seeds.
    """
    X0, V0 = _initial(init, config.seed, 1, config.n, model.d)
    prev = static_snapshots(config, X0, V0)
    res = PicardTrace()
    for k in range(k_max):
        cur = picard_iterate(config, model, prev, (X0, V0))
        e = _sup_index_distance(cur, prev)
        res.distances.append(e)
        za = np.hstack(cur[-1][1:])
        zb = np.hstack(prev[-1][1:])
        res.exact_final.append(dist2_exact(_subsample(za, exact_n), _subsample(zb, exact_n)) ** 2)
        prev = cur
        res.k = k
        if e <= tol:
            res.converged = True
            break
    res.iterate = prev
    if compare_direct:
        direct = run(replace(config, stride=1), model, (X0, V0))
        zf = np.hstack(prev[-1][1:])
        zd = np.hstack(direct.snapshots[-1][1:])
        res.direct_distance = dist2_exact(_subsample(zf, exact_n), _subsample(zd, exact_n))
        other = SimConfig(config.dt, config.t_final, config.n, config.seed + 1, 1, config.history)
        alt = run(other, model, init)
        za = _subsample(np.hstack(alt.snapshots[-1][1:]), exact_n)
        res.floor = dist2_exact(_subsample(zd, exact_n), za)
    return res
