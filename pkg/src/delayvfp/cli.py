"""Command line entry point: ``delayvfp <verb> ...``.

Exit status: 0 success, 1 usage or input error, 2 validity violation,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import experiments as ex
from ._version import __version__
from .config import ExperimentSpec, load_config, parse_grid
from .exceptions import (ConfigError, ConvergenceError, DivergenceError, DomainError,
                         InvalidInputError, NoPositiveRateError, ValidityError)
from .kummer import KummerParams, decay_exponent_fit, integro_ode_solve, phi_infinite_delay
from .metrics import QuadraticForm, distQ_coupled_upper, distQ_exact, dist2_exact, theorem_form
from .model import model_from_mapping
from .rates import RateParameters, halanay_rate, lambdas, overall_rate
from .simulator import SimConfig, gaussian_init, run, run_coupled, write_snapshots_csv
from .stationary import GridSpec, fixed_point_rho
from .trace import DecayTrace, read_csv, write_csv
from .verify import check_inequality, halanay_compare_solve, picard_converge

EXIT_OK, EXIT_USAGE, EXIT_VALIDITY, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _grid_arg(s: str) -> tuple[float, ...]:
    try:
        return parse_grid(s)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {path}")


def _spec(args) -> ExperimentSpec:
    return load_config(args.config) if args.config else ExperimentSpec()


def _model_values(args, spec: ExperimentSpec) -> dict:
    vals = dict(spec.model)
    for key in ("potential", "interaction", "k", "gamma", "sigma", "d"):
        v = getattr(args, key.replace("potential", "model"), None)
        if v is not None:
            vals[key] = v
    return vals


def _add_model_opts(p):
    p.add_argument("--model", help="built-in potential: quadratic, quadratic+cosine, quartic")
    p.add_argument("--interaction", help="none, quadratic or gaussian")
    p.add_argument("--k", type=float, help="interaction strength")
    p.add_argument("--gamma", type=float, help="friction")
    p.add_argument("--sigma", type=float, help="noise strength")
    p.add_argument("--d", type=int, help="dimension")


def _add_run_opts(p):
    p.add_argument("--n", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float)
    p.add_argument("--H", type=float)
    p.add_argument("--stride", type=int)


def _sim_settings(args, spec):
    def pick(name):
        v = getattr(args, name, None)
        return getattr(spec, name) if v is None else v

    seed = spec.seed if args.seed is None else args.seed
    cfg = SimConfig(dt=pick("dt"), t_final=pick("t_final"), n=pick("n"), seed=seed,
                    stride=pick("stride"))
    return cfg, pick("H")


# -- verbs ----------------------------------------------------------------------

def cmd_simulate(args):
    spec = _spec(args)
    cfg, H = _sim_settings(args, spec)
    model, _ = model_from_mapping(_model_values(args, spec), H=H)
    meta = ex.metadata("simulate", dt=cfg.dt, t_final=cfg.t_final, n=cfg.n, seed=cfg.seed,
                       stride=cfg.stride, H=H, coupled=args.coupled,
                       **{"model." + k: v for k, v in _model_values(args, spec).items()})
    if args.coupled:
        res = run_coupled(cfg, model, gaussian_init(**spec.init), gaussian_init(**spec.init_b),
                          theorem_form(model.gamma))
        path = _out(args, f"{spec.name}_coupled.csv")
        res.J.to_csv(path, comment=meta)
        print(f"wrote {path}")
        return EXIT_OK
    res = run(cfg, model, gaussian_init(**spec.init), keep_snapshots=args.snapshots)
    names = list(res.traces)
    path = _out(args, f"{spec.name}_trace.csv")
    write_csv(path, ["t"] + names,
              np.column_stack([res.times] + [res.traces[k].values for k in names]), comment=meta)
    print(f"wrote {path}")
    if args.snapshots:
        spath = _out(args, f"{spec.name}_snapshots.csv")
        write_snapshots_csv(spath, res.snapshots, comment=meta)
        print(f"wrote {spath}")
    return EXIT_OK


def cmd_rates(args):
    if args.rates_cmd == "lambda":
        p = RateParameters(args.gamma, args.eta, args.H)
        if not p.valid:
            bad = [k for k, ok in p.flags.items() if not ok]
            raise ValidityError(f"gamma={args.gamma}, eta={args.eta} fails {bad}")
        l1, l2 = lambdas(args.gamma, args.eta)
        print(f"lambda1 = {l1!r}\nlambda2 = {l2!r}\nlambda = {overall_rate(args.gamma, args.eta, args.H)!r}")
        return EXIT_OK
    rows = []
    for g in args.gamma_grid:
        for e in args.eta_grid:
            for H in args.H_grid:
                p = RateParameters(g, e, H)
                if p.valid:
                    l1, l2 = lambdas(g, e)
                    rows.append((g, e, H, l1, l2, overall_rate(g, e, H), 1))
                else:
                    rows.append((g, e, H, math.nan, math.nan, math.nan, 0))
    path = args.csv
    text = write_csv(path, ["gamma", "eta", "H", "lambda1", "lambda2", "lambda", "valid"], rows,
                     ex.metadata("rates-sweep", gamma_grid=list(args.gamma_grid),
                                 eta_grid=list(args.eta_grid), H_grid=list(args.H_grid)))
    _emit(text, path)
    return EXIT_OK


def _load_cloud(path: str) -> np.ndarray:
    """Phase-space points from a snapshot CSV (last recorded time) or a bare ``x..,v..`` table."""
    header, data = read_csv(path)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InvalidInputError(f"{path}: no data rows")
    if header[:2] == ["t", "particle"]:
        data = data[data[:, 0] == data[:, 0].max()][:, 2:]
    if data.shape[1] % 2:
        raise InvalidInputError(f"{path}: expected an even number of x/v columns")
    return data


def cmd_metrics(args):
    A, B = _load_cloud(args.a), _load_cloud(args.b)
    a, b = args.form
    form = QuadraticForm(a, b)
    print(f"dist2 = {dist2_exact(A, B)!r}")
    print(f"distQ^2 = {distQ_exact(A, B, form).squared!r}")
    print(f"distQ^2 coupled upper = {distQ_coupled_upper(A, B, form)!r}")
    return EXIT_OK


def cmd_kummer(args):
    if args.kummer_cmd == "trace":
        ode = integro_ode_solve(args.lambda1, args.lambda2, args.y0, 0.0, args.t_final, args.dt)
        phi = phi_infinite_delay(KummerParams(args.lambda1, args.lambda2, args.y0), ode.times)
        text = write_csv(args.csv, ["t", "phi", "phi_ode"],
                         np.column_stack([ode.times, phi, ode.values]),
                         ex.metadata("kummer-trace", lambda1=args.lambda1, lambda2=args.lambda2,
                                     y0=args.y0, t_final=args.t_final, dt=args.dt))
        _emit(text, args.csv)
        return EXIT_OK
    header, data = read_csv(args.csv_in)
    trace = DecayTrace(data[:, 0], data[:, 1], header[1])
    window = (args.t_min, args.t_max) if args.t_min is not None else None
    fit = decay_exponent_fit(trace, window, lambda1=args.lambda1, full=True)
    print(f"exponent = {fit.slope!r}\nstderr = {fit.slope_se!r}\nr2 = {fit.r2!r}")
    return EXIT_OK


def cmd_stationary(args):
    spec = _spec(args)
    _, pot = model_from_mapping(_model_values(args, spec))
    L, M = args.grid
    grid = GridSpec(float(L), int(M), int(args.dim))
    res = fixed_point_rho(grid, pot.Phi, pot.U, args.theta2, damping=args.damping,
                          tol=spec.tolerances["fixed_point"])
    pts = grid.points.reshape(-1, grid.dim)
    cols = [f"x{i + 1}" for i in range(grid.dim)] + ["rho"]
    text = write_csv(args.csv, cols, np.column_stack([pts, res.rho.values.ravel()]),
                     ex.metadata("stationary", theta2=args.theta2, L=float(L), M=int(M),
                                 dim=grid.dim, **{"model." + k: v for k, v in
                                                  _model_values(args, spec).items()}))
    _emit(text, args.csv)
    print(f"iterations = {res.iterations}\nresidual = {res.residual!r}\n"
          f"free_energy = {res.free_energy!r}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    if args.verify_cmd == "halanay":
        tr = halanay_compare_solve(args.a, args.b, args.H, args.y0, 0.0, args.t_final, args.dt,
                                   history=args.history)
        lam = halanay_rate(args.a, args.b, args.H)
        text = write_csv(args.csv, ["t", "y", "closed_form"],
                         np.column_stack([tr.times, tr.values, args.y0 * np.exp(-lam * tr.times)]),
                         ex.metadata("halanay", a=args.a, b=args.b, H=args.H, y0=args.y0,
                                     t_final=args.t_final, dt=args.dt, history=args.history))
        _emit(text, args.csv)
        return EXIT_OK
    if args.verify_cmd == "picard":
        spec = _spec(args)
        cfg, H = _sim_settings(args, spec)
        model, _ = model_from_mapping(_model_values(args, spec), H=H)
        pt = picard_converge(cfg, model, gaussian_init(**spec.init), k_max=args.k_max,
                             tol=spec.tolerances["picard"])
        for k, e in enumerate(pt.distances, 1):
            print(f"E_{k} = {e!r}")
        print(f"converged = {pt.converged}\ndirect distance = {pt.direct_distance!r}\n"
              f"two-run floor = {pt.floor!r}")
        return EXIT_OK
    header, data = read_csv(args.trace)
    trace = DecayTrace(data[:, 0], data[:, 1], header[1])
    l1, l2 = lambdas(args.gamma, args.eta)
    rep = check_inequality(trace, l1, l2, args.H, slack=args.slack)
    print(f"checked = {rep.n_checked}\nviolations = {rep.n_violations}\n"
          f"fraction = {rep.fraction!r}\nmax excess = {rep.max_excess!r}")
    return EXIT_OK if rep.fraction <= args.max_fraction else EXIT_VALIDITY


def cmd_figures(args):
    spec = _spec(args)
    grid = args.gamma_grid or spec.gamma_grid
    name = args.figure
    path = args.csv or _out(args, f"figure_{name}.csv")
    if name == "validity":
        ex.figure_validity(grid, path)
        x, y = "gamma", "eta_bar"
    elif name == "hypo":
        ex.figure_hypocoercive(grid, path)
        x, y = "gamma", "lambda"
    elif name == "families":
        ex.figure_rate_families(grid, args.H_list or spec.H_list, path=path)
        x, y = "gamma", "lambda"
    else:
        H = args.H_list or tuple(float(h) for h in np.logspace(-3, 3, 200))
        ex.figure_delay(H, path=path)
        x, y = "H", "lambda"
    print(f"wrote {path}")
    if args.gnuplot:
        gp = os.path.splitext(path)[0] + ".gp"
        with open(gp, "w") as fh:
            fh.write(ex.gnuplot_script(os.path.basename(path), x, y, name))
        print(f"wrote {gp}")
    return EXIT_OK


def cmd_campaign(args):
    spec = _spec(args)
    cfg, H = _sim_settings(args, spec)
    values = _model_values(args, spec)
    model, _ = model_from_mapping(values, H=H)
    seeds = spec.seeds if args.seeds is None else args.seeds
    rows = ex.campaign_decay(model, seeds, cfg.n, cfg.t_final, cfg.dt, cfg.stride,
                             spec.init, spec.init_b, spec.tolerances["n_sigma"],
                             workers=args.workers)
    path = _out(args, f"{spec.name}_campaign.csv")
    ex.campaign_csv(rows, path, dt=cfg.dt, t_final=cfg.t_final, n=cfg.n, H=H,
                    seeds=list(seeds), **{"model." + k: v for k, v in values.items()})
    print(f"wrote {path}")
    n_pass = sum(r.passed for r in rows)
    print(f"passed {n_pass}/{len(rows)} seeds")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="delayvfp", description="Delayed kinetic particle systems: rates, "
                "simulation and verification.")
    p.add_argument("--version", action="version", version=f"delayvfp {__version__}")
    p.add_argument("--config", help="key = value experiment file")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--seed", type=int, help="override the configured seed")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run the particle system")
    _add_model_opts(s)
    _add_run_opts(s)
    s.add_argument("--coupled", action="store_true", help="two ensembles on shared noise, write J")
    s.add_argument("--snapshots", action="store_true", help="also write particle snapshots")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rates", help="decay-rate formulas")
    rs = r.add_subparsers(dest="rates_cmd", required=True, parser_class=_Parser)
    rl = rs.add_parser("lambda")
    rl.add_argument("--gamma", type=float, required=True)
    rl.add_argument("--eta", type=float, default=0.0)
    rl.add_argument("--H", type=float, default=0.0)
    sw = rs.add_parser("sweep")
    sw.add_argument("--gamma-grid", type=_grid_arg, required=True)
    sw.add_argument("--eta-grid", type=_grid_arg, default=(0.0,))
    sw.add_argument("--H-grid", type=_grid_arg, default=(0.0,))
    sw.add_argument("--csv")
    r.set_defaults(func=cmd_rates)

    m = sub.add_parser("metrics", help="distances between particle clouds")
    ms = m.add_subparsers(dest="metrics_cmd", required=True, parser_class=_Parser)
    mc = ms.add_parser("compare")
    mc.add_argument("--a", required=True)
    mc.add_argument("--b", required=True)
    mc.add_argument("--form", type=_floats, required=True, help="a,b of the quadratic form")
    m.set_defaults(func=cmd_metrics)

    k = sub.add_parser("kummer", help="infinite-delay comparison function")
    ks = k.add_subparsers(dest="kummer_cmd", required=True, parser_class=_Parser)
    kt = ks.add_parser("trace")
    kt.add_argument("--lambda1", type=float, required=True)
    kt.add_argument("--lambda2", type=float, required=True)
    kt.add_argument("--t-final", type=float, required=True)
    kt.add_argument("--dt", type=float, default=0.01)
    kt.add_argument("--y0", type=float, default=1.0)
    kt.add_argument("--csv")
    ke = ks.add_parser("exponent")
    ke.add_argument("--csv-in", required=True)
    ke.add_argument("--lambda1", type=float)
    ke.add_argument("--t-min", type=float)
    ke.add_argument("--t-max", type=float, default=math.inf)
    k.set_defaults(func=cmd_kummer)

    st = sub.add_parser("stationary", help="self-consistent stationary density")
    sts = st.add_subparsers(dest="stationary_cmd", required=True, parser_class=_Parser)
    so = sts.add_parser("solve")
    _add_model_opts(so)
    so.add_argument("--theta2", type=float, required=True)
    so.add_argument("--grid", type=_floats, required=True, help="L,M")
    so.add_argument("--dim", type=int, default=1)
    so.add_argument("--damping", type=float, default=0.5)
    so.add_argument("--csv")
    st.set_defaults(func=cmd_stationary)

    v = sub.add_parser("verify", help="comparison solvers and audits")
    vs = v.add_subparsers(dest="verify_cmd", required=True, parser_class=_Parser)
    vh = vs.add_parser("halanay")
    vh.add_argument("--a", type=float, required=True)
    vh.add_argument("--b", type=float, required=True)
    vh.add_argument("--H", type=float, required=True)
    vh.add_argument("--y0", type=float, default=1.0)
    vh.add_argument("--t-final", type=float, default=10.0)
    vh.add_argument("--dt", type=float, default=1e-3)
    vh.add_argument("--history", choices=["exponential", "constant"], default="exponential")
    vh.add_argument("--csv")
    vp = vs.add_parser("picard")
    _add_model_opts(vp)
    _add_run_opts(vp)
    vp.add_argument("--k-max", type=int, default=10)
    vi = vs.add_parser("inequality")
    vi.add_argument("--trace", required=True)
    vi.add_argument("--gamma", type=float, required=True)
    vi.add_argument("--eta", type=float, required=True)
    vi.add_argument("--H", type=float, required=True)
    vi.add_argument("--slack", type=float, default=0.0)
    vi.add_argument("--max-fraction", type=float, default=0.01)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("figures", help="rate-curve tables")
    f.add_argument("figure", choices=["validity", "hypo", "families", "delay"])
    f.add_argument("--gamma-grid", type=_grid_arg)
    f.add_argument("--H-list", type=_grid_arg)
    f.add_argument("--csv")
    f.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    f.set_defaults(func=cmd_figures)

    c = sub.add_parser("campaign", help="seeded coupled runs against the predicted rate")
    _add_model_opts(c)
    _add_run_opts(c)
    c.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")])
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=cmd_campaign)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidityError, NoPositiveRateError, DomainError) as exc:
        print(f"validity violation: {exc}", file=sys.stderr)
        return EXIT_VALIDITY
    except (DivergenceError, ConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
