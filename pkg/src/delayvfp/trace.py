"""Time series container and the rate fits used on it."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError

__all__ = ["DecayTrace", "LineFit", "fit_exponential", "fit_power_law", "write_csv", "read_csv"]


@dataclass(frozen=True)
class DecayTrace:
    times: np.ndarray
    values: np.ndarray
    name: str = "J"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise InvalidInputError("times and values must be 1-d arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def window(self, t_min=-np.inf, t_max=np.inf) -> "DecayTrace":
        m = (self.times >= t_min) & (self.times <= t_max)
        return DecayTrace(self.times[m], self.values[m], self.name, dict(self.meta))

    def to_csv(self, path=None, comment: str | None = None) -> str:
        return write_csv(path, ["t", self.name], np.column_stack([self.times, self.values]),
                         comment=comment)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_se: float
    r2: float
    n: int


def _linfit(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise InvalidInputError("need at least 3 points to fit")
    A = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    sxx = float(((x - x.mean()) ** 2).sum())
    se = np.sqrt(ss_res / (n - 2) / sxx) if sxx > 0 else np.inf
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LineFit(float(coef[0]), float(coef[1]), float(se), float(r2), n)


def fit_exponential(trace: DecayTrace) -> LineFit:
    """Least squares of ``log J`` against ``t``; the decay rate is ``-slope``."""
    if np.any(trace.values <= 0):
        raise InvalidInputError("exponential fit needs positive values")
    return _linfit(trace.times, np.log(trace.values))


def fit_power_law(trace: DecayTrace) -> LineFit:
    """Least squares of ``log J`` against ``log t``; the slope is the exponent."""
    if np.any(trace.values <= 0) or np.any(trace.times <= 0):
        raise InvalidInputError("power-law fit needs positive times and values")
    return _linfit(np.log(trace.times), np.log(trace.values))


def write_csv(path, header, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body if r])
