import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize_scalar

from delayvfp.exceptions import DomainError, NoPositiveRateError, ValidityError
from delayvfp.rates import (RateParameters, derivation_constants, eta_bar, halanay_rate,
                            hypocoercive_rate, lambda1_general, lambdas, lambert_w0,
                            optimal_b, optimal_gamma, overall_rate)


def char_root(a, b, H):
    # independent oracle: bracket the zero of the increasing -a + lam + b exp(lam H)
    return brentq(lambda lam: -a + lam + b * math.exp(lam * H), -1e-12, a, xtol=1e-15, rtol=1e-15)


class TestLambertW:
    def test_known_values(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
        assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-9)

    def test_against_bisection(self):
        for z in [1e-8, 0.3, 2.0, 50.0, 1e4]:
            oracle = brentq(lambda w: w * math.exp(w) - z, 0.0, max(1.0, math.log1p(z) + 1))
            assert lambert_w0(z) == pytest.approx(oracle, rel=1e-12)

    @given(st.floats(min_value=0.0, max_value=1e6))
    def test_residual(self, z):
        w = lambert_w0(z)
        assert abs(w * math.exp(w) - z) <= 1e-12 * max(1.0, z)

    def test_huge_argument(self):
        w = lambert_w0(1e300)
        assert math.log(w) + w == pytest.approx(math.log(1e300), rel=1e-14)

    def test_array_input(self):
        z = np.array([0.0, 1.0, math.e])
        np.testing.assert_allclose(lambert_w0(z), [0.0, 0.5671432904097838, 1.0], rtol=1e-13)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            lambert_w0(-0.1)


class TestHalanayRate:
    def test_no_delay_coupling(self):
        assert halanay_rate(1.0, 0.0, 2.0) == 1.0

    def test_small_delay_limit(self):
        assert halanay_rate(2.0, 1.0, 1e-8) == pytest.approx(1.0, abs=1e-6)
        assert halanay_rate(2.0, 1.0, 0.0) == 1.0

    def test_infinite_delay(self):
        assert halanay_rate(2.0, 1.0, math.inf) == 0.0

    def test_reference_case(self):
        lam = halanay_rate(2.0, 1.0, 1.0)
        assert lam == pytest.approx(0.4429, abs=1e-4)
        assert abs(-2 + lam + math.exp(lam)) <= 1e-10
        assert lam == pytest.approx(char_root(2.0, 1.0, 1.0), abs=1e-13)

    @settings(max_examples=200)
    @given(st.floats(0.01, 20), st.floats(0.0, 0.99), st.floats(1e-3, 50))
    def test_unique_root(self, a, frac, H):
        b = frac * a
        lam = halanay_rate(a, b, H)
        assert 0 < lam <= a
        f = lambda x: -a + x + b * np.exp(x * H) if b else -a + x
        assert abs(f(lam)) <= 1e-10 * max(1.0, a)
        # sign change brackets the root
        assert f(lam * (1 - 1e-6) - 1e-12) < 0 < f(lam * (1 + 1e-6) + 1e-12)

    def test_rejects_a_le_b(self):
        with pytest.raises(NoPositiveRateError):
            halanay_rate(1.0, 1.0, 1.0)
        with pytest.raises(NoPositiveRateError):
            halanay_rate(1.0, -0.1, 1.0)


class TestLambdas:
    def test_hypocoercive_case(self):
        l1, l2 = lambdas(2.0, 0.0)
        assert l1 == pytest.approx(2 - math.sqrt(2), abs=1e-14)
        assert l2 == 0.0

    def test_hand_values(self):
        l1, l2 = lambdas(1.0, 0.25)
        assert l1 == pytest.approx(0.30, abs=1e-14)
        assert l2 == pytest.approx(0.1125, abs=1e-14)

    def test_boundary_rejected(self):
        with pytest.raises(ValidityError):
            lambdas(1.0, 0.5)

    def test_ordering_on_grid(self):
        for g in np.linspace(0.05, 50, 60):
            for frac in (0.1, 0.5, 1.0):
                l1, l2 = lambdas(g, frac * eta_bar(g))
                assert l1 > l2 > 0


class TestOverallRate:
    def test_values(self):
        assert overall_rate(1.0, 0.25, 0.0) == pytest.approx(0.1875, abs=1e-12)
        assert overall_rate(1.0, 0.25, math.inf) == 0.0
        lam = overall_rate(1.0, 0.25, 1.0)
        assert lam == pytest.approx(0.167, abs=1e-3)
        # oracle: W(0.1125 e^0.3) through bisection
        z = 0.1125 * math.exp(0.3)
        w = brentq(lambda x: x * math.exp(x) - z, 0, 1)
        assert lam == pytest.approx(0.3 - w, abs=1e-12)

    def test_monotone_in_H(self):
        H = np.logspace(-3, 3, 200)
        lam = [overall_rate(1.0, 0.25, h) for h in H]
        assert np.all(np.diff(lam) <= 0)

    def test_monotone_in_eta(self):
        for g in (0.5, 1.0, 3.0):
            eta = np.linspace(0, eta_bar(g), 40)
            lam = [overall_rate(g, e, 1.0) for e in eta]
            assert np.all(np.diff(lam) <= 1e-15)


class TestSpecialCases:
    def test_eta_bar(self):
        assert eta_bar(1.0) == pytest.approx(1 / 3)
        assert eta_bar(2.0) == pytest.approx(4 / 9)
        assert eta_bar(1e-12) < 1e-11
        for g in np.logspace(-2, 2, 50):
            assert eta_bar(g) < g / (1 + g)
            assert eta_bar(g) < 1 + g - math.sqrt(1 + g * g)

    def test_hypocoercive_rate(self):
        assert hypocoercive_rate(2.0) == pytest.approx(2 - math.sqrt(2), abs=1e-14)
        assert hypocoercive_rate(1e-9) < 1e-8
        g = np.linspace(0.01, 10, 100)
        np.testing.assert_allclose(hypocoercive_rate(g), [lambdas(x, 0.0)[0] for x in g],
                                   atol=1e-12, rtol=0)

    def test_optimal_gamma_by_search(self):
        res = minimize_scalar(lambda g: -hypocoercive_rate(g), bounds=(0.1, 10),
                              method="bounded", options={"xatol": 1e-10})
        assert res.x == pytest.approx(optimal_gamma(), abs=1e-6)
        assert optimal_gamma() == pytest.approx(1.5723, abs=1e-4)

    def test_optimal_b(self):
        assert optimal_b(1.0) == 2.0
        assert optimal_b(2.0) == 1.0
        bs = np.linspace(1.2, 5, 3801)
        vals = [lambda1_general(b, 1.0, 0.0) for b in bs]
        assert abs(bs[int(np.argmax(vals))] - 2.0) <= 1e-3


class TestRateParameters:
    def test_default_b(self):
        assert RateParameters(2.0, 0.1).b == 1.0

    def test_flags(self):
        p = RateParameters(1.0, 0.25)
        assert p.valid
        assert not RateParameters(1.0, 0.4).valid
        assert not RateParameters(1.0, 0.0, b=0.5).flags["b_interval"]

    def test_rejects_bad_input(self):
        with pytest.raises(DomainError):
            RateParameters(0.0, 0.1)


class TestDerivation:
    def test_printed_values(self):
        r = derivation_constants(2.0, 1.0, 0.0)
        assert r.d1 == pytest.approx(2 / 3)
        assert r.d2 == pytest.approx(1 / math.sqrt(5))
        assert r.d4 == 0.0
        assert r.lambda2 == 0.0

    def test_positive_constants(self):
        for g in (0.5, 1.0, 2.0):
            for frac in (0.0, 0.5, 0.9):
                r = derivation_constants(2 / g, g, frac * eta_bar(g))
                assert min(r.d1, r.d2, r.d3, r.epsilon) > 0 and r.d4 >= 0

    def test_closed_form_cross_check(self):
        r = derivation_constants(2.0, 1.0, 0.25)
        d1, d2 = r.discrepancy
        assert abs(d1) < 1e-12 and abs(d2) < 1e-12

    def test_epsilon_relation_residuals(self):
        r = derivation_constants(2.0, 1.0, 0.25)
        assert abs(r.eps_residual_plus) < 1e-12
        # the relation with 1 - d3 is not what the epsilon formula solves
        assert abs(r.eps_residual_printed) > 1e-3
        p = r.eps_printed_root
        assert (1 - p) == pytest.approx((1 - r.d3 - 1 / p) * r.d2 ** 2, abs=1e-10)

    def test_validity_violation_named(self):
        with pytest.raises(ValidityError, match="b\\(b\\+gamma\\)"):
            derivation_constants(0.1, 1.0, 0.0)
        with pytest.raises(ValidityError, match="2 b gamma"):
            derivation_constants(0.9, 1.0, 0.0)
