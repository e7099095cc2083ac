"""Euler-Maruyama integration of the N-particle delay system.

Each velocity feels the interaction averaged over the recent past,

    F_i(t) = 1/h(t) int_{t-h(t)}^t 1/N sum_j B(X_i(t), X_j(s)) ds,

where ``h(t) = min(t, H)`` is the cut-off.  The self term ``j = i`` is part
of the sum.  At ``h(t) = 0`` (``t = 0`` or ``H = 0``) the average is replaced
by its limit, the instantaneous interaction.

Noise is counter based: the Gaussian block of step ``k`` is generated from a
Philox stream keyed by the seed with ``k`` in the counter, so any step can be
regenerated independently and two coupled ensembles share it bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import DivergenceError, InternalError, InvalidInputError
from .metrics import QuadraticForm, Q_eval
from .model import DriftModel
from .trace import DecayTrace, write_csv

__all__ = [
    "cutoff_h",
    "noise_block",
    "default_dt",
    "SimConfig",
    "EnsembleState",
    "HistoryBuffer",
    "delay_force",
    "step",
    "run",
    "run_coupled",
    "RunResult",
    "CoupledResult",
    "gaussian_init",
    "write_snapshots_csv",
]

_TOL = 1e-9


def cutoff_h(t: float, H: float) -> float:
    """Length of the memory window at time ``t``: ``t`` up to ``H``, then ``H``."""
    if t < 0:
        raise InvalidInputError(f"time must be nonnegative, got {t}")
    if H < 0:
        raise InvalidInputError(f"cut-off must be nonnegative, got {H}")
    return t if t <= H else H


def noise_block(seed: int, step_index: int, n: int, d: int) -> np.ndarray:
    """Standard normal ``(n, d)`` block for one step; row ``i`` belongs to particle ``i``."""
    bitgen = np.random.Philox(key=int(seed) % 2**128, counter=int(step_index) << 64)
    return np.random.Generator(bitgen).standard_normal((n, d))


def default_dt(model: DriftModel) -> float:
    return min(0.01, 0.1 / model.gamma, 0.1 / math.sqrt(model.alpha))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_final: float
    n: int
    seed: int = 0
    stride: int = 1
    history: str = "windowed"

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= 0:
            raise InvalidInputError(f"t_final must be nonnegative, got {self.t_final}")
        if self.n < 1:
            raise InvalidInputError("need at least one particle")
        if self.stride < 1:
            raise InvalidInputError("output stride must be >= 1")
        if self.history not in ("windowed", "full"):
            raise InvalidInputError(f"history policy must be windowed or full, got {self.history!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def time(self, k: int) -> float:
        return k * self.dt


@dataclass
class EnsembleState:
    t: float
    X: np.ndarray
    V: np.ndarray
    rng_seed: int
    model: DriftModel
    step_index: int = 0

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if self.X.shape != self.V.shape:
            raise InvalidInputError(f"X and V shapes differ: {self.X.shape} vs {self.V.shape}")
        if self.X.shape[1] != self.model.d:
            raise InvalidInputError(f"state dimension {self.X.shape[1]} != model dimension {self.model.d}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.V))):
            raise InvalidInputError("state contains non-finite values")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def Z(self) -> np.ndarray:
        return np.hstack([self.X, self.V])


class HistoryBuffer:
    """Uniformly spaced position snapshots of the interaction source.

    Besides positions (only needed for non-affine kernels) the buffer keeps
    the ensemble mean and its running trapezoid integral, which makes the
    affine-kernel average O(1) per step.  With ``mode="windowed"`` and finite
    ``H`` only the last ``ceil(H/dt) + 2`` snapshots are retained; otherwise
    everything is kept (memory O(T/dt * N * d)).
    """

    def __init__(self, dt: float, H: float, keep_positions: bool = True,
                 mode: str = "windowed"):
        self.dt = float(dt)
        self.H = float(H)
        self.keep_positions = keep_positions
        if mode == "full" or math.isinf(self.H):
            self.capacity = None
        elif self.H == 0:
            self.capacity = 1
        else:
            self.capacity = math.ceil(self.H / self.dt) + 2
        self._t: list[float] = []
        self._X: list[np.ndarray] = []
        self._m: list[np.ndarray] = []
        self._cum: list[np.ndarray] = []
        self._start = 0

    def __len__(self):
        return len(self._t) - self._start

    @property
    def times(self) -> np.ndarray:
        return np.array(self._t[self._start:])

    @property
    def t_first(self) -> float:
        return self._t[self._start]

    @property
    def t_last(self) -> float:
        return self._t[-1]

    def append(self, t: float, X: np.ndarray) -> None:
        X = np.asarray(X, dtype=float)
        m = X.mean(axis=0)
        if self._t:
            gap = t - self._t[-1]
            if abs(gap - self.dt) > _TOL * max(1.0, self.dt) * 1e3:
                raise InternalError(f"snapshot spacing {gap} differs from dt={self.dt}")
            cum = self._cum[-1] + 0.5 * gap * (m + self._m[-1])
        else:
            cum = np.zeros_like(m)
        self._t.append(float(t))
        self._m.append(m)
        self._cum.append(cum)
        self._X.append(X.copy() if self.keep_positions else None)
        if self.capacity is not None and len(self) > self.capacity:
            self._start = len(self._t) - self.capacity
            if self._start > 4 * self.capacity + 64:
                for lst in (self._t, self._X, self._m, self._cum):
                    del lst[: self._start]
                self._start = 0

    def _locate(self, s: float) -> tuple[int, float]:
        """Absolute index ``k`` and fraction ``f`` with ``s = t_k + f dt``."""
        pos = (s - self.t_first) / self.dt
        if pos < -1e-7:
            raise InternalError(
                f"history starts at {self.t_first} but the window needs {s}"
            )
        k = int(math.floor(pos + 1e-7))
        f = max(pos - k, 0.0)
        if f < 1e-7:
            f = 0.0
        return self._start + k, f

    def covers(self, t: float, h: float) -> bool:
        if not self._t or abs(self.t_last - t) > 1e-7 * max(1.0, self.dt):
            return False
        return self.t_first <= t - h + 1e-7 * self.dt

    def _check(self, t, h):
        if not self.covers(t, h):
            lo = self.t_first if self._t else None
            hi = self.t_last if self._t else None
            raise InternalError(f"history [{lo}, {hi}] does not cover window [{t - h}, {t}]")

    def mean_average(self, t: float, h: float) -> np.ndarray:
        """Time average of the ensemble mean over ``[t - h, t]`` (trapezoid)."""
        self._check(t, h)
        if h == 0:
            return self._m[-1]
        k, f = self._locate(t - h)
        cum_lo = self._cum[k]
        if f > 0:
            dm = self._m[k + 1] - self._m[k]
            cum_lo = cum_lo + f * self.dt * (self._m[k] + 0.5 * f * dm)
        return (self._cum[-1] - cum_lo) / h

    def nodes(self, t: float, h: float) -> tuple[list[np.ndarray], np.ndarray]:
        """Quadrature nodes (position snapshots) and trapezoid weights summing to ``h``."""
        self._check(t, h)
        if not self.keep_positions:
            raise InternalError("buffer was created without position storage")
        if h == 0:
            return [self._X[-1]], np.array([1.0])
        k, f = self._locate(t - h)
        pts = self._X[k:]
        ts = np.array(self._t[k:])
        if f > 0:
            first = (1 - f) * self._X[k] + f * self._X[k + 1]
            pts = [first] + self._X[k + 1:]
            ts = np.concatenate([[t - h], ts[1:]])
        gaps = np.diff(ts)
        w = np.zeros(ts.size)
        w[:-1] += 0.5 * gaps
        w[1:] += 0.5 * gaps
        return pts, w


def _pair_average(model: DriftModel, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Rows ``1/N sum_j B(X_i, Y_j)``."""
    n = X.shape[0]
    # chunk target rows to bound memory of the (rows, N, d) kernel block
    rows = max(1, 4_000_000 // max(1, Y.size))
    out = np.empty_like(X)
    for lo in range(0, n, rows):
        blk = model.B(X[lo:lo + rows, None, :], Y[None, :, :])
        out[lo:lo + rows] = blk.mean(axis=1)
    return out


def delay_force(X: np.ndarray, hist: HistoryBuffer, t: float, model: DriftModel,
                i: int | None = None) -> np.ndarray:
    """Delayed interaction felt by the target positions ``X`` at time ``t``.

    ``hist`` holds the source ensemble (the ensemble itself for a direct run,
    a frozen one inside a Picard sweep).  The result is the term added to
    ``dV/dt``; pass ``i`` to get a single particle's row.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if i is not None:
        X = X[i:i + 1]
    if model.B is None:
        out = np.zeros_like(X)
    else:
        h = cutoff_h(t, model.H)
        aff = model.affine
        if aff is not None:
            out = aff.p * X + aff.q * hist.mean_average(t, h)
        else:
            pts, w = hist.nodes(t, h)
            out = np.zeros_like(X)
            for Y, wk in zip(pts, w):
                if wk:
                    out += wk * _pair_average(model, X, Y)
            out /= w.sum()
    return out[0] if i is not None else out


def _advance(X, V, F, model: DriftModel, dt: float, xi, step_index: int):
    with np.errstate(over="ignore", invalid="ignore"):
        Xn = X + V * dt
        Vn = V + (model.A(X) + F - model.gamma * V) * dt
        if model.sigma > 0:
            Vn = Vn + math.sqrt(2.0 * model.sigma * dt) * xi
    if not (np.all(np.isfinite(Xn)) and np.all(np.isfinite(Vn))):
        raise DivergenceError(f"non-finite state after step {step_index}", step=step_index)
    return Xn, Vn


def step(state: EnsembleState, hist: HistoryBuffer, dt: float, xi: np.ndarray | None = None,
         source_next: np.ndarray | None = None) -> EnsembleState:
    """One Euler-Maruyama step.

    ``hist`` must end at ``state.t``.  After the update the new positions are
    appended to ``hist``, or ``source_next`` is appended instead when the
    interaction source is an external (frozen) ensemble.
    """
    model = state.model
    k = state.step_index
    if xi is None and model.sigma > 0:
        xi = noise_block(state.rng_seed, k, state.N, model.d)
    F = delay_force(state.X, hist, state.t, model)
    Xn, Vn = _advance(state.X, state.V, F, model, dt, xi, k)
    t_next = (k + 1) * dt
    hist.append(t_next, Xn if source_next is None else source_next)
    return EnsembleState(t_next, Xn, Vn, state.rng_seed, model, k + 1)


InitSpec = "tuple[np.ndarray, np.ndarray] | Callable[[np.random.Generator, int, int], tuple]"


def _initial(init, seed: int, stream: int, n: int, d: int):
    if callable(init):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), stream]))
        X, V = init(rng, n, d)
    else:
        X, V = init
    X, V = np.array(X, dtype=float), np.array(V, dtype=float)
    if X.size != n * d or V.size != n * d:
        raise InvalidInputError(f"initial ensemble must hold {n} particles in dimension {d}")
    return X.reshape(n, d), V.reshape(n, d)


def gaussian_init(x_mean=0.0, v_mean=0.0, x_std=1.0, v_std=1.0):
    """Sampler for independent Gaussian positions and velocities."""

    def sample(rng, n, d):
        X = x_mean + x_std * rng.standard_normal((n, d))
        V = v_mean + v_std * rng.standard_normal((n, d))
        return X, V

    return sample


@dataclass
class RunResult:
    times: np.ndarray
    snapshots: list
    traces: dict
    final: EnsembleState


def _default_functionals():
    return {
        "v2": lambda s: float(np.mean(np.sum(s.V ** 2, axis=1))),
        "x2": lambda s: float(np.mean(np.sum(s.X ** 2, axis=1))),
    }


def run(config: SimConfig, model: DriftModel, init,
        functionals: dict[str, Callable[[EnsembleState], float]] | None = None,
        keep_snapshots: bool = True, init_stream: int = 1) -> RunResult:
    """Integrate from ``t = 0`` to ``config.t_final``.

    ``init`` is an ``(X, V)`` pair or a sampler ``f(rng, n, d)``.  Every
    ``config.stride`` steps the requested functionals are evaluated and, if
    ``keep_snapshots``, a copy of ``(t, X, V)`` is stored.
    """
    functionals = _default_functionals() if functionals is None else functionals
    X, V = _initial(init, config.seed, init_stream, config.n, model.d)
    state = EnsembleState(0.0, X, V, config.seed, model)
    hist = HistoryBuffer(config.dt, model.H, keep_positions=model.affine is None,
                         mode=config.history)
    hist.append(0.0, state.X)
    times, snaps = [], []
    values = {name: [] for name in functionals}

    def record(s):
        times.append(s.t)
        # a finite but huge state may square to inf; that is recorded, not warned about
        with np.errstate(over="ignore"):
            for name, fn in functionals.items():
                values[name].append(fn(s))
        if keep_snapshots:
            snaps.append((s.t, s.X.copy(), s.V.copy()))

    record(state)
    for k in range(config.n_steps):
        state = step(state, hist, config.dt)
        if (k + 1) % config.stride == 0:
            record(state)
    times = np.array(times)
    traces = {name: DecayTrace(times, np.array(v), name) for name, v in values.items()}
    return RunResult(times, snaps, traces, state)


@dataclass
class CoupledResult:
    times: np.ndarray
    J: DecayTrace
    J_batches: np.ndarray
    snapshots: list = field(default_factory=list)
    final: tuple = ()
    form: QuadraticForm | None = None


def run_coupled(config: SimConfig, model: DriftModel, init_a, init_b,
                form: QuadraticForm, n_batches: int = 10,
                keep_snapshots: bool = False) -> CoupledResult:
    """Evolve two ensembles driven by the same noise and track ``J = mean_i Q(Z_i - Zhat_i)``.

    Particle ``i`` of one ensemble is paired with particle ``i`` of the other.
    ``J_batches`` holds the same functional over ``n_batches`` contiguous
    particle groups, for batch-means error bars.
    """
    n, d = config.n, model.d
    Xa, Va = _initial(init_a, config.seed, 1, n, d)
    Xb, Vb = _initial(init_b, config.seed, 2, n, d)
    if Xa.shape != Xb.shape:
        raise InvalidInputError("coupled ensembles need equal particle counts")
    sa = EnsembleState(0.0, Xa, Va, config.seed, model)
    sb = EnsembleState(0.0, Xb, Vb, config.seed, model)
    keep = model.affine is None
    ha = HistoryBuffer(config.dt, model.H, keep, config.history)
    hb = HistoryBuffer(config.dt, model.H, keep, config.history)
    ha.append(0.0, sa.X)
    hb.append(0.0, sb.X)
    n_batches = max(1, min(n_batches, n))
    groups = np.array_split(np.arange(n), n_batches)

    times, J, Jb, snaps = [], [], [], []

    def record(a, b):
        q = Q_eval(form, np.hstack([a.X - b.X, a.V - b.V]))
        times.append(a.t)
        J.append(float(q.mean()))
        Jb.append([float(q[g].mean()) for g in groups])
        if keep_snapshots:
            snaps.append((a.t, a.Z.copy(), b.Z.copy()))

    record(sa, sb)
    for k in range(config.n_steps):
        xi = noise_block(config.seed, k, n, d) if model.sigma > 0 else None
        sa = step(sa, ha, config.dt, xi)
        sb = step(sb, hb, config.dt, xi)
        if (k + 1) % config.stride == 0:
            record(sa, sb)
    times = np.array(times)
    trace = DecayTrace(times, np.array(J), "J",
                       {"a": form.a, "b": form.b, "H": model.H, "seed": config.seed})
    return CoupledResult(times, trace, np.array(Jb), snaps, (sa, sb), form)


def write_snapshots_csv(path, snapshots: Sequence, comment: str | None = None) -> str:
    """CSV with header ``t,particle,x1..xd,v1..vd``; one row per particle per snapshot."""
    if not snapshots:
        raise InvalidInputError("no snapshots to write")
    d = snapshots[0][1].shape[1]
    header = ["t", "particle"] + [f"x{k + 1}" for k in range(d)] + [f"v{k + 1}" for k in range(d)]
    rows = []
    for t, X, V in snapshots:
        for i in range(X.shape[0]):
            rows.append([float(t), i, *map(float, X[i]), *map(float, V[i])])
    return write_csv(path, header, rows, comment=comment)
