import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayvfp.exceptions import DomainError, InvalidInputError
from delayvfp.metrics import (MAX_EXACT_N, Q_eval, QuadraticForm, distQ_coupled_upper,
                              distQ_exact, dist2_exact, equivalence_constants, theorem_form)


def brute_min(cost):
    n = cost.shape[0]
    return min(np.mean(cost[np.arange(n), list(p)]) for p in itertools.permutations(range(n)))


def q_cost(A, B, a, b):
    d = A.shape[1] // 2
    diff = A[:, None, :] - B[None, :, :]
    x, v = diff[..., :d], diff[..., d:]
    return a * (x * x).sum(-1) + 2 * (x * v).sum(-1) + b * (v * v).sum(-1)


forms = st.tuples(st.floats(0.2, 10), st.floats(0.2, 10)).filter(lambda ab: ab[0] * ab[1] > 1.05)


class TestQuadraticForm:
    def test_values(self):
        f = QuadraticForm(2.0, 2.0)
        assert Q_eval(f, np.zeros(2)) == 0.0
        assert Q_eval(f, np.array([1.0, 1.0])) == pytest.approx(6.0)
        assert Q_eval(f, np.array([1.0, -1.0])) == pytest.approx(2.0)

    def test_equivalence_constants(self):
        assert equivalence_constants(QuadraticForm(2.0, 2.0)) == pytest.approx((1.0, 3.0))
        for a in (1.5, 3.0, 7.0):
            assert equivalence_constants(a, a) == pytest.approx((a - 1, a + 1))
        p, q = equivalence_constants(theorem_form(1.0))
        assert p > 0 and q > p

    def test_theorem_form(self):
        f = theorem_form(1.0)
        assert (f.a, f.b) == (3.0, 2.0)

    def test_invalid(self):
        with pytest.raises(DomainError):
            QuadraticForm(1.0, 1.0)
        with pytest.raises(DomainError):
            QuadraticForm(-2.0, -2.0)

    @settings(max_examples=50)
    @given(forms, st.integers(1, 3))
    def test_factorization(self, ab, d):
        f = QuadraticForm(*ab)
        fac = f.factorization(d)
        assert np.max(np.abs(fac.S.T @ fac.S - fac.M_Q)) <= 1e-12 * max(1.0, np.abs(fac.M_Q).max())
        z = np.random.default_rng(0).standard_normal((20, 2 * d))
        np.testing.assert_allclose(np.einsum("ni,ij,nj->n", z, fac.M_Q, z), Q_eval(f, z),
                                   rtol=1e-12)
        Sz = f.transform(z)
        np.testing.assert_allclose((Sz ** 2).sum(-1), Q_eval(f, z), rtol=1e-12)

    def test_bounds_on_samples(self):
        rng = np.random.default_rng(1)
        for a, b in [(2.0, 2.0), (3.0, 2.0), (0.5, 5.0)]:
            f = QuadraticForm(a, b)
            p, q = f.pq
            z = rng.standard_normal((10_000, 4))
            n2 = (z ** 2).sum(-1)
            Q = Q_eval(f, z)
            assert np.all(p * n2 <= Q * (1 + 1e-12)) and np.all(Q <= q * n2 * (1 + 1e-12))


class TestExactDistances:
    def test_identical(self):
        A = np.random.default_rng(0).standard_normal((5, 2))
        assert dist2_exact(A, A) == 0.0
        assert distQ_exact(A, A, QuadraticForm(2, 2)).squared == 0.0
        assert distQ_coupled_upper(A, A, QuadraticForm(2, 2)) == 0.0

    def test_single_point(self):
        A, B = np.array([[1.0, 2.0]]), np.array([[0.0, -1.0]])
        assert dist2_exact(A, B) == pytest.approx(math.sqrt(10))
        f = QuadraticForm(2, 2)
        assert distQ_exact(A, B, f).squared == pytest.approx(Q_eval(f, A[0] - B[0]))
        assert distQ_exact(A, B, f).root == pytest.approx(math.sqrt(Q_eval(f, A[0] - B[0])))

    def test_brute_force_n3(self):
        rng = np.random.default_rng(2)
        A, B = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        cost = ((A[:, None] - B[None]) ** 2).sum(-1)
        assert dist2_exact(A, B) ** 2 == pytest.approx(brute_min(cost), rel=1e-14)

    def test_transformed_points(self):
        rng = np.random.default_rng(3)
        f = QuadraticForm(3.0, 2.0)
        A, B = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
        assert distQ_exact(A, B, f).squared == pytest.approx(
            dist2_exact(f.transform(A), f.transform(B)) ** 2, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        f = QuadraticForm(3.0, 2.0)
        A, B = rng.standard_normal((7, 2)), rng.standard_normal((7, 2))
        Bp = B[rng.permutation(7)]
        assert distQ_exact(A, Bp, f).squared == pytest.approx(distQ_exact(A, B, f).squared)
        assert distQ_coupled_upper(A, Bp, f) != pytest.approx(distQ_coupled_upper(A, B, f))

    def test_metric_properties(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            A, B, C = (rng.standard_normal((6, 2)) for _ in range(3))
            assert dist2_exact(A, B) == dist2_exact(B, A)
            assert dist2_exact(A, C) <= dist2_exact(A, B) + dist2_exact(B, C) + 1e-9

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 6), forms, st.integers(0, 2**31))
    def test_oracle_and_bounds(self, n, ab, seed):
        rng = np.random.default_rng(seed)
        A, B = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
        f = QuadraticForm(*ab)
        cost2 = ((A[:, None] - B[None]) ** 2).sum(-1)
        assert dist2_exact(A, B) ** 2 == pytest.approx(brute_min(cost2), rel=1e-12, abs=1e-14)
        dq = distQ_exact(A, B, f).squared
        assert dq == pytest.approx(brute_min(q_cost(A, B, *ab)), rel=1e-12, abs=1e-14)
        assert distQ_coupled_upper(A, B, f) >= dq - 1e-12
        p, q = f.pq
        d2 = dist2_exact(A, B) ** 2
        assert p * d2 <= dq * (1 + 1e-12) + 1e-14 and dq <= q * d2 * (1 + 1e-12) + 1e-14

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            dist2_exact(np.zeros((3, 2)), np.zeros((4, 2)))
        big = np.zeros((MAX_EXACT_N + 1, 2))
        with pytest.raises(InvalidInputError):
            dist2_exact(big, big)
