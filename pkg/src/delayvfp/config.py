"""Flat ``key = value`` experiment files.

One assignment per line, ``#`` starts a comment, blank lines are ignored.
Keys and their defaults:

=================  ==========  ==============================================
key                default     meaning
=================  ==========  ==============================================
experiment         default     name used in output file names
dt                 0.001       time step
t_final            20.0        horizon
n                  1000        particles per ensemble
seed               0           base seed for single runs
seeds              0           comma list of seeds for campaigns
H                  0.0         delay cut-off, ``inf`` for the full history
stride             10          record every ``stride`` steps
out_dir            .           output directory
gamma_grid         0.01:10:100 ``start:stop:num`` or a comma list
H_list             0,0.5,1,2,5 delays for the rate families
init.x_mean        0.0         first ensemble, Gaussian position mean
init.x_std         1.0
init.v_mean        0.0
init.v_std         1.0
init_b.x_mean      1.0         second ensemble of a coupled run
init_b.x_std       1.0
init_b.v_mean      0.0
init_b.v_std       1.0
tol.picard         1e-12       Picard stopping tolerance
tol.fixed_point    1e-12       stationary fixed-point tolerance
tol.n_sigma        3.0         statistical slack in standard errors
model.*            see below   passed to :func:`model_from_mapping`
=================  ==========  ==============================================

``model.*`` keys: potential, interaction, alpha, k, cos_amp, quartic, ell,
d, gamma, sigma.  The built-in potentials are example instances chosen for
testing, not canonical choices.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError
from .model import MODEL_DEFAULTS, MODEL_KEYS

__all__ = ["ExperimentSpec", "SCHEMA", "parse_grid", "parse_text", "load_config",
           "loads", "dump", "normalize"]


def _fmt_float(x: float) -> str:
    return "inf" if x == math.inf else repr(float(x))


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}") from None


def _parse_int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}") from None


def parse_grid(s: str) -> tuple[float, ...]:
    """``"a:b:n"`` (inclusive linspace) or ``"x1,x2,..."``."""
    s = s.strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {s!r} must read start:stop:num")
        lo, hi, num = _parse_float(parts[0]), _parse_float(parts[1]), _parse_int(parts[2])
        if num < 1:
            raise ConfigError("grid needs at least one point")
        return tuple(float(x) for x in np.linspace(lo, hi, num))
    vals = tuple(_parse_float(p) for p in s.split(",") if p.strip())
    if not vals:
        raise ConfigError("grid is empty")
    return vals


def _fmt_grid(vals) -> str:
    return ",".join(_fmt_float(v) for v in vals)


def _parse_seeds(s: str) -> tuple[int, ...]:
    vals = tuple(_parse_int(p) for p in s.split(",") if p.strip())
    if not vals:
        raise ConfigError("seed list is empty")
    return vals


# key -> (parser, formatter, default text)
SCHEMA = {
    "experiment": (str, str, "default"),
    "dt": (_parse_float, _fmt_float, "0.001"),
    "t_final": (_parse_float, _fmt_float, "20.0"),
    "n": (_parse_int, str, "1000"),
    "seed": (_parse_int, str, "0"),
    "seeds": (_parse_seeds, lambda v: ",".join(map(str, v)), "0"),
    "H": (_parse_float, _fmt_float, "0.0"),
    "stride": (_parse_int, str, "10"),
    "out_dir": (str, str, "."),
    "gamma_grid": (parse_grid, _fmt_grid, "0.01:10:100"),
    "H_list": (parse_grid, _fmt_grid, "0,0.5,1,2,5"),
    "init.x_mean": (_parse_float, _fmt_float, "0.0"),
    "init.x_std": (_parse_float, _fmt_float, "1.0"),
    "init.v_mean": (_parse_float, _fmt_float, "0.0"),
    "init.v_std": (_parse_float, _fmt_float, "1.0"),
    "init_b.x_mean": (_parse_float, _fmt_float, "1.0"),
    "init_b.x_std": (_parse_float, _fmt_float, "1.0"),
    "init_b.v_mean": (_parse_float, _fmt_float, "0.0"),
    "init_b.v_std": (_parse_float, _fmt_float, "1.0"),
    "tol.picard": (_parse_float, _fmt_float, "1e-12"),
    "tol.fixed_point": (_parse_float, _fmt_float, "1e-12"),
    "tol.n_sigma": (_parse_float, _fmt_float, "3.0"),
}
for _k, _typ in MODEL_KEYS.items():
    _p = {float: _parse_float, int: _parse_int, str: str}[_typ]
    _f = {float: _fmt_float, int: str, str: str}[_typ]
    SCHEMA["model." + _k] = (_p, _f, _f(MODEL_DEFAULTS[_k]))


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "default"
    dt: float = 0.001
    t_final: float = 20.0
    n: int = 1000
    seed: int = 0
    seeds: tuple = (0,)
    H: float = 0.0
    stride: int = 10
    out_dir: str = "."
    gamma_grid: tuple = field(default_factory=lambda: parse_grid("0.01:10:100"))
    H_list: tuple = (0.0, 0.5, 1.0, 2.0, 5.0)
    init: dict = field(default_factory=lambda: {"x_mean": 0.0, "x_std": 1.0, "v_mean": 0.0, "v_std": 1.0})
    init_b: dict = field(default_factory=lambda: {"x_mean": 1.0, "x_std": 1.0, "v_mean": 0.0, "v_std": 1.0})
    tolerances: dict = field(default_factory=lambda: {"picard": 1e-12, "fixed_point": 1e-12, "n_sigma": 3.0})
    model: dict = field(default_factory=lambda: dict(MODEL_DEFAULTS))

    def __post_init__(self):
        if not self.gamma_grid or not self.H_list or not self.seeds:
            raise ConfigError("grids and seed lists must be nonempty")

    def check_out_dir(self) -> str:
        """Create the output directory if needed and confirm it is writable."""
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out_dir!r}: {exc}") from None
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError(f"output directory {self.out_dir!r} is not writable")
        return self.out_dir


def parse_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings, with line-numbered errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=lineno, key=key)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, key=key)
        try:
            SCHEMA[key][0](value)
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}", line=lineno, key=key) from None
        out[key] = value
    return out


def _typed(raw: dict[str, str]) -> dict:
    vals = {k: SCHEMA[k][0](v) for k, v in raw.items()}
    return {k: vals.get(k, SCHEMA[k][0](SCHEMA[k][2])) for k in SCHEMA}


def loads(text: str) -> ExperimentSpec:
    v = _typed(parse_text(text))

    def group(prefix):
        return {k[len(prefix):]: v[k] for k in SCHEMA if k.startswith(prefix)}

    return ExperimentSpec(
        name=v["experiment"], dt=v["dt"], t_final=v["t_final"], n=v["n"], seed=v["seed"],
        seeds=v["seeds"], H=v["H"], stride=v["stride"], out_dir=v["out_dir"],
        gamma_grid=v["gamma_grid"], H_list=v["H_list"], init=group("init."),
        init_b=group("init_b."), tolerances=group("tol."), model=group("model."),
    )


def load_config(path) -> ExperimentSpec:
    with open(path) as fh:
        return loads(fh.read())


def _canonical(values: dict) -> str:
    return "".join(f"{k} = {SCHEMA[k][1](values[k])}\n" for k in SCHEMA)


def dump(spec: ExperimentSpec) -> str:
    """Every key in schema order with canonical value formatting."""
    values = {
        "experiment": spec.name, "dt": spec.dt, "t_final": spec.t_final, "n": spec.n,
        "seed": spec.seed, "seeds": spec.seeds, "H": spec.H, "stride": spec.stride,
        "out_dir": spec.out_dir, "gamma_grid": spec.gamma_grid, "H_list": spec.H_list,
    }
    for prefix, d in (("init.", spec.init), ("init_b.", spec.init_b),
                      ("tol.", spec.tolerances), ("model.", spec.model)):
        values.update({prefix + k: val for k, val in d.items()})
    return _canonical(values)


def normalize(text: str) -> str:
    """Canonical form of a config text: defaults filled in, comments dropped, schema order."""
    return _canonical(_typed(parse_text(text)))
