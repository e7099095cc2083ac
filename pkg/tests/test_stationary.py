import math

import numpy as np
import pytest
from scipy.integrate import quad

from delayvfp.exceptions import ConvergenceError, DomainError, InvalidInputError
from delayvfp.model import DriftModel, builtin_potential
from delayvfp.simulator import SimConfig
from delayvfp.stationary import (DensityGrid, GridSpec, _kernel, convolve, fixed_point_rho,
                                 free_energy, maxwellian, sample_stationary, verify_stationarity)

QUAD = builtin_potential("quadratic")
GAUSS = builtin_potential("quadratic", interaction="gaussian", k=0.3)


def gaussian_density(x, var=1.0):
    return np.exp(-x ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)


class TestGrid:
    def test_spacing(self):
        g = GridSpec(6.0, 241)
        assert g.delta == pytest.approx(0.05)
        assert GridSpec.from_delta(6.0, 0.05).M == 241
        assert g.points.shape == (241, 1)
        assert GridSpec(2.0, 5, dim=2).points.shape == (5, 5, 2)

    def test_invalid(self):
        for bad in (dict(L=0.0, M=10), dict(L=1.0, M=2), dict(L=1.0, M=10, dim=3)):
            with pytest.raises(InvalidInputError):
                GridSpec(**bad)
        with pytest.raises(InvalidInputError):
            DensityGrid(GridSpec(1.0, 3), np.array([0.1, -0.1, 0.2]))


class TestMaxwellian:
    def test_value(self):
        assert maxwellian([0.0], 1.0) == pytest.approx(0.39894228, abs=1e-8)

    def test_moments(self):
        th2 = 0.7
        v = np.linspace(-8 * math.sqrt(th2), 8 * math.sqrt(th2), 4001)
        dv = v[1] - v[0]
        f = maxwellian(v[:, None], th2)
        assert np.trapezoid(f, dx=dv) == pytest.approx(1.0, abs=1e-9)
        assert np.trapezoid(v ** 2 * f, dx=dv) == pytest.approx(th2, abs=1e-9)
        V = np.stack(np.meshgrid(v[::20], v[::20], indexing="ij"), axis=-1)
        f2 = maxwellian(V, th2)
        dv2 = dv * 20
        assert (np.sum(V ** 2, axis=-1) * f2).sum() * dv2 ** 2 == pytest.approx(2 * th2, abs=1e-6)

    def test_nonpositive_temperature(self):
        with pytest.raises(DomainError):
            maxwellian([0.0], 0.0)


class TestConvolve:
    @pytest.mark.parametrize("dim,M", [(1, 31), (1, 301), (2, 9)])
    def test_against_direct_sum(self, dim, M):
        g = GridSpec(3.0, M, dim=dim)
        rng = np.random.default_rng(0)
        rho = rng.random((M,) * dim)
        U = GAUSS.U
        pts = g.points.reshape(-1, dim)
        direct = np.array([(U(p - pts) * rho.ravel()).sum() for p in pts]) * g.weight
        out = convolve(g, _kernel(g, U), rho).ravel()
        np.testing.assert_allclose(out, direct, rtol=1e-11, atol=1e-13)


class TestFixedPoint:
    def test_no_interaction_single_sweep(self):
        g = GridSpec.from_delta(6.0, 0.05)
        res = fixed_point_rho(g, QUAD.Phi, None, 1.0)
        assert res.iterations == 1 and res.residual <= 1e-12

    @pytest.mark.parametrize("delta", [0.2, 0.1, 0.05])
    def test_gaussian_benchmark(self, delta):
        g = GridSpec.from_delta(8.0, delta)
        res = fixed_point_rho(g, QUAD.Phi, None, 1.0)
        err = np.max(np.abs(res.rho.values - gaussian_density(g.axis)))
        assert err <= delta ** 2

    def test_second_order_in_spacing(self):
        # a kink at the origin makes the trapezoid error visibly O(delta^2)
        Phi = lambda x: np.abs(x[..., 0])
        errs = []
        for M in (301, 601, 1201):
            g = GridSpec(30.0, M)
            rho = fixed_point_rho(g, Phi, None, 1.0).rho.values
            errs.append(np.max(np.abs(rho - 0.5 * np.exp(-np.abs(g.axis)))))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        np.testing.assert_allclose(ratios, 4.0, rtol=0.05)

    def test_even_potentials_give_even_density(self):
        g = GridSpec(7.0, 201)
        rho = fixed_point_rho(g, GAUSS.Phi, GAUSS.U, 1.0).rho.values
        assert np.max(np.abs(rho - rho[::-1])) <= 1e-10

    def test_mass(self):
        g = GridSpec(7.0, 201)
        res = fixed_point_rho(g, GAUSS.Phi, GAUSS.U, 0.8)
        assert res.rho.mass == pytest.approx(1.0, abs=1e-12)

    def test_integral_equation_constant(self):
        g = GridSpec(7.0, 281)
        th2 = 0.8
        res = fixed_point_rho(g, GAUSS.Phi, GAUSS.U, th2)
        rho = res.rho.values
        lhs = th2 * np.log(rho) + GAUSS.Phi(g.points) + convolve(g, _kernel(g, GAUSS.U), rho)
        mask = rho > math.exp(-30)
        assert np.ptp(lhs[mask]) <= 1e-10

    def test_quadratic_interaction_closed_form(self):
        # U = k|x|^2/2 with a centred density shifts the confinement by k|x|^2/2
        k, th2 = 0.5, 0.6
        pot = builtin_potential("quadratic", interaction="quadratic", k=k)
        g = GridSpec(7.0, 281)
        rho = fixed_point_rho(g, pot.Phi, pot.U, th2).rho.values
        var = th2 / (1 + k)
        assert np.max(np.abs(rho - gaussian_density(g.axis, var))) <= 1e-6

    def test_two_dimensional(self):
        g = GridSpec(6.0, 61, dim=2)
        res = fixed_point_rho(g, GAUSS.Phi, GAUSS.U, 1.0)
        rho = res.rho.values
        assert res.rho.mass == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(rho - rho.T)) <= 1e-10
        assert np.max(np.abs(rho - rho[::-1, ::-1])) <= 1e-10

    def test_box_too_small(self):
        with pytest.raises(DomainError, match="box"):
            fixed_point_rho(GridSpec(1.0, 41), QUAD.Phi, None, 1.0)

    def test_iteration_budget(self):
        with pytest.raises(ConvergenceError) as info:
            fixed_point_rho(GridSpec(7.0, 201), GAUSS.Phi, GAUSS.U, 1.0, max_iter=1)
        assert info.value.residual > 0

    def test_bad_arguments(self):
        g = GridSpec(6.0, 101)
        with pytest.raises(DomainError):
            fixed_point_rho(g, QUAD.Phi, None, 0.0)
        with pytest.raises(InvalidInputError):
            fixed_point_rho(g, QUAD.Phi, None, 1.0, damping=0.0)


class TestFreeEnergy:
    def test_gaussian_closed_form(self):
        th2 = 1.0
        g = GridSpec.from_delta(8.0, 0.05)
        rho = DensityGrid(g, gaussian_density(g.axis))
        oracle = quad(lambda x: th2 * (math.log(gaussian_density(x)) - 1) * gaussian_density(x)
                      + 0.5 * x * x * gaussian_density(x), -12, 12, epsabs=1e-13)[0]
        assert oracle == pytest.approx(-(1 + 0.5 * math.log(2 * math.pi)), abs=1e-10)
        assert free_energy(rho, QUAD.Phi, None, th2) == pytest.approx(oracle, abs=1e-9)

    def test_constant_shift(self):
        g = GridSpec(7.0, 201)
        rho = fixed_point_rho(g, GAUSS.Phi, GAUSS.U, 1.0).rho
        F0 = free_energy(rho, GAUSS.Phi, GAUSS.U, 1.0)
        F1 = free_energy(rho, lambda x: GAUSS.Phi(x) + 2.5, GAUSS.U, 1.0)
        assert F1 - F0 == pytest.approx(2.5 * rho.mass, abs=1e-12)

    def test_minimizer(self):
        g = GridSpec(7.0, 201)
        res = fixed_point_rho(g, GAUSS.Phi, GAUSS.U, 1.0)
        rng = np.random.default_rng(3)
        rho = res.rho.values
        for _ in range(20):
            bump = rng.normal(size=rho.shape) * rho
            bump -= bump.sum() / rho.sum() * rho
            pert = rho + 0.05 * bump / np.max(np.abs(bump) / rho)
            F = free_energy(DensityGrid(g, pert), GAUSS.Phi, GAUSS.U, 1.0)
            assert res.free_energy <= F

    def test_empty_cells(self):
        g = GridSpec(1.0, 5)
        vals = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
        assert math.isfinite(free_energy(DensityGrid(g, vals), QUAD.Phi, None, 1.0))


class TestVerifyStationarity:
    def test_sampler_moments(self):
        g = GridSpec(8.0, 321)
        res = fixed_point_rho(g, QUAD.Phi, None, 0.5)
        X, V = sample_stationary(res, 20000, np.random.default_rng(0))
        assert X.var() == pytest.approx(0.5, rel=0.05) and V.var() == pytest.approx(0.5, rel=0.05)

    def test_no_interaction(self):
        model = DriftModel(d=1, gamma=1.0, sigma=1.0)
        res = fixed_point_rho(GridSpec(8.0, 321), QUAD.Phi, None, model.theta2)
        rep = verify_stationarity(res, model, SimConfig(dt=0.005, t_final=10.0, n=4000, seed=2))
        assert rep.passed, rep.z_scores

    def test_small_interaction(self):
        pot = builtin_potential("quadratic", interaction="gaussian", k=0.1)
        model = pot.to_model(d=1, gamma=1.0, sigma=1.0, H=0.0)
        res = fixed_point_rho(GridSpec(8.0, 321), pot.Phi, pot.U, model.theta2)
        rep = verify_stationarity(res, model, SimConfig(dt=0.01, t_final=5.0, n=1000, seed=4),
                                  n_sigma=5)
        assert rep.passed, rep.z_scores

    def test_degenerate_noise(self):
        res = fixed_point_rho(GridSpec(8.0, 161), QUAD.Phi, None, 1.0)
        with pytest.raises(DomainError):
            verify_stationarity(res, DriftModel(d=1, sigma=0.0),
                                SimConfig(dt=0.01, t_final=1.0, n=10))

    def test_temperature_mismatch(self):
        res = fixed_point_rho(GridSpec(8.0, 161), QUAD.Phi, None, 1.0)
        with pytest.raises(InvalidInputError):
            verify_stationarity(res, DriftModel(d=1, sigma=0.5),
                                SimConfig(dt=0.01, t_final=1.0, n=10))
