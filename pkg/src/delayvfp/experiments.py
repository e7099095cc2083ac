"""Rate-curve tables and seeded decay campaigns.

Every CSV written here starts with a ``#`` line carrying the package version
and the full parameter set, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .exceptions import NoPositiveRateError, ValidityError
from .metrics import theorem_form
from .model import DriftModel
from .rates import RateParameters, eta_bar, hypocoercive_rate, lambdas, overall_rate
from .simulator import SimConfig, gaussian_init, run_coupled
from .trace import DecayTrace, fit_exponential, fit_power_law, write_csv
from .verify import InequalityReport, check_inequality

__all__ = [
    "ETA_RULES",
    "metadata",
    "figure_validity",
    "figure_hypocoercive",
    "figure_rate_families",
    "figure_delay",
    "gnuplot_script",
    "CampaignRow",
    "campaign_decay",
    "campaign_csv",
    "fit_window",
]

ETA_RULES = {
    "2g/(3+3g)": lambda g: 2 * g / (3 + 3 * g),
    "g/(2+2g)": lambda g: g / (2 + 2 * g),
}


def _fmt(v) -> str:
    if isinstance(v, (tuple, list, np.ndarray)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metadata(kind: str, **params) -> str:
    """``delayvfp <version> kind=<kind> key=value ...`` with keys sorted."""
    body = " ".join(f"{k}={_fmt(params[k])}" for k in sorted(params))
    return f"delayvfp {__version__} kind={kind} {body}".rstrip()


def _grid(gammas) -> np.ndarray:
    g = np.atleast_1d(np.asarray(gammas, dtype=float))
    if g.size == 0:
        raise ValueError("gamma grid is empty")
    return g


def _rate_or_zero(gamma, eta, H):
    try:
        return overall_rate(gamma, eta, H)
    except NoPositiveRateError:
        return 0.0


def figure_validity(gammas, path=None) -> str:
    """``gamma,eta_bar`` rows: the upper edge of the admissible interaction strength."""
    g = _grid(gammas)
    rows = [(float(x), float(eta_bar(x))) for x in g]
    return write_csv(path, ["gamma", "eta_bar"], rows,
                     metadata("validity", gamma_grid=[float(x) for x in g]))


def figure_hypocoercive(gammas, path=None) -> str:
    """``gamma,lambda,is_max`` rows of the interaction-free rate; the grid maximiser is flagged."""
    g = _grid(gammas)
    lam = hypocoercive_rate(g)
    imax = int(np.argmax(lam))
    rows = [(float(x), float(y), int(i == imax)) for i, (x, y) in enumerate(zip(g, lam))]
    return write_csv(path, ["gamma", "lambda", "is_max"], rows,
                     metadata("hypo", gamma_grid=[float(x) for x in g]))


def figure_rate_families(gammas, H_list=(0.0,), rules=tuple(ETA_RULES), path=None) -> str:
    """``gamma,eta_rule,H,lambda`` for each interaction rule ``eta(gamma)`` and delay."""
    g = _grid(gammas)
    rows = []
    for rule in rules:
        f = ETA_RULES[rule]
        for H in H_list:
            for x in g:
                rows.append((float(x), rule, float(H), float(_rate_or_zero(x, f(x), H))))
    return write_csv(path, ["gamma", "eta_rule", "H", "lambda"], rows,
                     metadata("families", gamma_grid=[float(x) for x in g],
                              H_list=[float(h) for h in H_list], rules=list(rules)))


def figure_delay(H_grid, gamma: float = 1.0, rule: str = "g/(2+2g)", path=None) -> str:
    """Rate against delay at fixed ``gamma`` and ``eta = rule(gamma)``."""
    H = np.atleast_1d(np.asarray(H_grid, dtype=float))
    eta = ETA_RULES[rule](gamma)
    rows = [(float(gamma), rule, float(h), float(_rate_or_zero(gamma, eta, h))) for h in H]
    return write_csv(path, ["gamma", "eta_rule", "H", "lambda"], rows,
                     metadata("delay", gamma=float(gamma), rule=rule,
                              H_grid=[float(h) for h in H]))


def gnuplot_script(csv_path: str, x: str, y: str, title: str = "") -> str:
    """Minimal gnuplot commands plotting column ``y`` against ``x`` of a figure CSV."""
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"set title '{title}'\n"
        f"set xlabel '{x}'\nset ylabel '{y}'\n"
        f"plot '{csv_path}' using '{x}':'{y}' with lines\n"
    )


# -- campaigns ----------------------------------------------------------------

@dataclass
class CampaignRow:
    seed: int
    lambda_fit: float
    fit_se: float
    lambda_predicted: float
    passed: bool
    r2_exponential: float
    r2_power: float
    power_exponent: float
    inequality: InequalityReport | None = None
    trace: DecayTrace | None = None


def fit_window(trace: DecayTrace, floor: float, skip: float = 0.1) -> DecayTrace:
    """Drop the first ``skip`` fraction of the horizon and all points with ``J < 1e3 * floor``.

    The window ends at the first time the trace reaches that level.
    """
    t0, t1 = trace.times[0], trace.times[-1]
    w = trace.window(t0 + skip * (t1 - t0), t1)
    low = np.nonzero(w.values < 1e3 * floor)[0]
    if low.size:
        w = DecayTrace(w.times[:low[0]], w.values[:low[0]], w.name, w.meta)
    return w


def _one_seed(args) -> CampaignRow:
    (model, seed, n, t_final, dt, stride, init_a, init_b, lam_pred, l1, l2,
     n_sigma, keep_trace) = args
    cfg = SimConfig(dt=dt, t_final=t_final, n=n, seed=seed, stride=stride)
    form = theorem_form(model.gamma)
    res = run_coupled(cfg, model, gaussian_init(**init_a), gaussian_init(**init_b), form)
    J = res.J
    if J.values[0] == 0.0:
        return CampaignRow(seed, math.nan, math.nan, lam_pred, True, math.nan, math.nan, math.nan,
                           None, J if keep_trace else None)
    # synchronous coupling has no sampling floor; the level is set by round-off
    floor = J.values[0] * np.finfo(float).eps
    w = fit_window(J, floor)
    ex = fit_exponential(w)
    pw = fit_power_law(w)
    lam_fit = -ex.slope
    passed = lam_fit >= lam_pred - n_sigma * ex.slope_se
    ineq = None
    if l1 is not None:
        ineq = check_inequality(J, l1, l2, model.H, batches=res.J_batches, n_sigma=n_sigma)
    return CampaignRow(seed, lam_fit, ex.slope_se, lam_pred, bool(passed), ex.r2, pw.r2,
                       pw.slope, ineq, J if keep_trace else None)


def campaign_decay(model: DriftModel, seeds, n: int, t_final: float, dt: float,
                   stride: int = 10, init_a=None, init_b=None, n_sigma: float = 3.0,
                   workers: int = 1, keep_traces: bool = False) -> list[CampaignRow]:
    """Coupled runs per seed, with the fitted decay rate of ``J`` set against the predicted rate.

    ``eta = c_g + 2 c_B`` and ``gamma`` come from ``model``; a parameter set
    outside the validity region raises :class:`ValidityError` before any
    simulation.  Rows come back in seed order whatever ``workers`` is.
    """
    eta = model.eta
    params = RateParameters(model.gamma, eta, model.H)
    if not params.valid:
        bad = [k for k, ok in params.flags.items() if not ok]
        raise ValidityError(f"gamma={model.gamma}, eta={eta} violates {bad}")
    lam_pred = overall_rate(model.gamma, eta, model.H)
    l1, l2 = lambdas(model.gamma, eta)
    init_a = dict(init_a or {"x_mean": 0.0})
    init_b = dict(init_b or {"x_mean": 1.0})
    jobs = [(model, int(s), n, t_final, dt, stride, init_a, init_b, lam_pred, l1, l2,
             n_sigma, keep_traces) for s in sorted(seeds)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(_one_seed, jobs))
    return [_one_seed(j) for j in jobs]


def campaign_csv(rows: list[CampaignRow], path=None, **params) -> str:
    out = [(r.seed, r.lambda_fit, r.lambda_predicted, int(r.passed), r.r2_exponential, r.r2_power)
           for r in rows]
    return write_csv(path, ["seed", "lambda_fit", "lambda_predicted", "pass",
                            "r2_exponential", "r2_power"], out, metadata("campaign", **params))
