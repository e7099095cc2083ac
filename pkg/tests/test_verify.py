import numpy as np
import pytest

from delayvfp.exceptions import InvalidInputError, NoPositiveRateError
from delayvfp.kummer import integro_ode_solve
from delayvfp.model import DriftModel, builtin_potential, linear_model
from delayvfp.rates import halanay_rate
from delayvfp.simulator import SimConfig, gaussian_init
from delayvfp.trace import DecayTrace
from delayvfp.verify import (check_inequality, comparison_ratio, halanay_compare_solve,
                             integro_compare_solve, picard_converge, picard_iterate,
                             static_snapshots)


class TestHalanaySolver:
    def test_no_delay_term(self):
        tr = halanay_compare_solve(1.3, 0.0, 1.0, 2.0, 0.5, 10.5, 1e-3)
        np.testing.assert_allclose(tr.values, 2.0 * np.exp(-1.3 * (tr.times - 0.5)), rtol=0,
                                   atol=1e-6)

    def test_exponential_history_is_exact(self):
        lam = halanay_rate(2.0, 1.0, 1.0)
        tr = halanay_compare_solve(2.0, 1.0, 1.0, 1.0, 0.0, 10.0, 1e-3, history="exponential")
        exact = np.exp(-lam * tr.times)
        assert np.max(np.abs(tr.values / exact - 1)) < 1e-4

    @pytest.mark.parametrize("method,order", [("euler", 0.9), ("heun", 1.8)])
    def test_convergence_order(self, method, order):
        lam = halanay_rate(2.0, 1.0, 1.0)
        errs = []
        for dt in (0.02, 0.01, 0.005):
            tr = halanay_compare_solve(2.0, 1.0, 1.0, 1.0, 0.0, 5.0, dt, method=method,
                                       history="exponential")
            errs.append(np.max(np.abs(tr.values - np.exp(-lam * tr.times))))
        assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= order)

    def test_monotone(self):
        for hist in ("constant", "exponential"):
            tr = halanay_compare_solve(2.0, 1.5, 0.7, 1.0, 0.0, 15.0, 1e-2, history=hist)
            assert np.all(np.diff(tr.values) <= 0)

    def test_constant_history_below_exponential(self):
        # the exponential is an upper solution when the history is held at y0
        lam = halanay_rate(2.0, 1.0, 1.0)
        tr = halanay_compare_solve(2.0, 1.0, 1.0, 1.0, 0.0, 10.0, 1e-3)
        assert np.all(tr.values <= np.exp(-lam * tr.times) * (1 + 1e-9))

    def test_comparison_property(self):
        # y = exp(-a t) satisfies y' <= -a y + b sup y, so it stays below phi
        a, b, H = 2.0, 1.0, 1.0
        phi = halanay_compare_solve(a, b, H, 1.0, 0.0, 10.0, 1e-3)
        assert np.all(np.exp(-a * phi.times) <= phi.values * (1 + 1e-9))

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            halanay_compare_solve(2.0, 1.0, 0.1, 1.0, 0.0, 1.0, 0.2)
        with pytest.raises(NoPositiveRateError):
            halanay_compare_solve(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.01)
        with pytest.raises(InvalidInputError):
            halanay_compare_solve(2.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.01, history="linear")

    def test_integro_delegation(self):
        a = integro_compare_solve(1.0, 0.5, 1.0, 1.0, 5.0, 0.01)
        b = integro_ode_solve(1.0, 0.5, 1.0, 1.0, 5.0, 0.01)
        assert np.array_equal(a.values, b.values)


class TestCheckInequality:
    def test_zero_trace(self):
        t = np.linspace(0, 5, 51)
        rep = check_inequality(DecayTrace(t, np.zeros_like(t)), 0.5, 0.1, 1.0)
        assert rep.n_violations == 0 and rep.n_checked == 49

    def test_equality_case(self):
        t = np.linspace(0, 10, 10001)
        rep = check_inequality(DecayTrace(t, np.exp(-0.3 * t)), 0.3, 0.0, 1.0, slack=1e-7)
        assert rep.n_violations == 0

    def test_detects_growth(self):
        t = np.linspace(0, 5, 501)
        rep = check_inequality(DecayTrace(t, np.exp(0.2 * t)), 0.3, 0.1, 1.0)
        assert rep.fraction == 1.0 and rep.max_excess > 0

    def test_supremum_variant(self):
        # the delay rate solves the sup form only once the full window is in the past
        t = np.linspace(0, 10, 2001)
        lam = halanay_rate(0.5, 0.2, 1.0)
        rep = check_inequality(DecayTrace(t, np.exp(-lam * t)), 0.5, 0.2, 1.0, slack=1e-5,
                               kind="sup")
        assert rep.n_violations > 0 and np.all(rep.violation_times < 1.0 + 1e-9)
        rep = check_inequality(DecayTrace(t, np.exp(-0.5 * t)), 0.5, 0.2, 1.0, kind="sup")
        assert rep.n_violations == 0

    def test_batch_slack(self):
        t = np.linspace(0, 2, 21)
        base = np.exp(-t)
        batches = base[:, None] * (1 + 0.01 * np.random.default_rng(0).normal(size=(21, 10)))
        rep = check_inequality(DecayTrace(t, batches.mean(axis=1)), 1.0, 0.0, 1.0,
                               batches=batches)
        assert rep.slack.shape == (19,) and np.all(rep.slack > 0)

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            check_inequality(DecayTrace([0.0, 1.0], [1.0, 0.5]), 0.5, 0.1, 1.0)

    def test_comparison_ratio(self):
        t = np.linspace(0, 5, 101)
        lam = halanay_rate(1.0, 0.2, 1.0)
        assert comparison_ratio(DecayTrace(t, np.exp(-lam * t)), 1.0, 0.2, 1.0) == pytest.approx(1.0)


class TestPicard:
    CFG = SimConfig(dt=0.01, t_final=1.0, n=100, seed=11)

    def test_no_interaction_converges_immediately(self):
        res = picard_converge(self.CFG, DriftModel(d=1, sigma=1.0), gaussian_init(),
                              compare_direct=False)
        assert res.converged and res.k == 1 and res.distances[1] == 0.0

    def test_distances_decrease(self):
        m = builtin_potential("quadratic", interaction="gaussian", k=0.2).to_model(
            d=1, sigma=1.0, H=0.05)
        res = picard_converge(self.CFG, m, gaussian_init(), k_max=6, compare_direct=True,
                              exact_n=100)
        d = np.array(res.distances)
        assert np.all(d[2:] <= d[1:-1])
        assert res.direct_distance <= res.floor

    def test_affine_kernel_matches_direct_run(self):
        m = linear_model(0.2, d=1, sigma=1.0, H=0.3)
        res = picard_converge(self.CFG, m, gaussian_init(), k_max=12, tol=1e-24)
        assert res.converged and res.direct_distance < 1e-10

    def test_reproducible(self):
        m = linear_model(0.2, d=1, sigma=1.0, H=0.3)
        X0, V0 = np.random.default_rng(0).normal(size=(2, 100, 1))
        frozen = static_snapshots(self.CFG, X0, V0)
        a = picard_iterate(self.CFG, m, frozen, (X0, V0))
        b = picard_iterate(self.CFG, m, frozen, (X0, V0))
        assert all(np.array_equal(x[1], y[1]) and np.array_equal(x[2], y[2])
                   for x, y in zip(a, b))

    def test_coverage_gap(self):
        m = linear_model(0.2, d=1, H=0.3)
        X0 = np.zeros((100, 1))
        short = static_snapshots(SimConfig(dt=0.01, t_final=0.5, n=100), X0, X0)
        with pytest.raises(InvalidInputError):
            picard_iterate(self.CFG, m, short, (X0, X0))
