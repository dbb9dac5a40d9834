import math

import numpy as np
import pytest
from scipy.integrate import quad

from nonlocal_kinetics import CoefficientModel, GridSpec, TabulatedRates
from nonlocal_kinetics.ee_system import (EESolution, MomentState, action_S, alpha2, d_matrix,
                                         match_constants, moments_from_field, sigma, sigma_ode_check)
from nonlocal_kinetics.errors import (AnisotropyError, DegenerateMassError, DomainError, ModelWarning,
                                      SingularSolutionError)
from nonlocal_kinetics.hermite import double_gaussian, double_gaussian_moments


def test_initial_values(ee085, ee1):
    assert sigma(ee085, 0.0) == pytest.approx(4.08407, abs=5e-6)
    assert sigma(ee1, 0.0) == pytest.approx(math.pi, rel=1e-14)
    # alpha(0) = D (g1^2 - eps g2^2) / (g1 - eps g2)
    np.testing.assert_allclose(np.diag(alpha2(ee085, 0.0)), 0.01 * (2.25 - 0.85) / 0.65, rtol=1e-14)


def test_sigma_matches_ode_oracle(ee085):
    t, ref = sigma_ode_check(ee085, 5.0, 1e-3)
    assert np.max(np.abs(ee085.sigma(t) - ref) / ref) < 1e-8


def test_rk4_order(ee085):
    t, fine = sigma_ode_check(ee085, 5.0, 1e-4)
    errs = []
    for dt in (0.1, 0.05):
        tc, coarse = sigma_ode_check(ee085, 5.0, dt)
        errs.append(abs(coarse[-1] - fine[-1]))
    assert errs[0] / errs[1] > 4.0


def test_linear_case_closed_form():
    model = CoefficientModel(kappa=0.0)
    ee = EESolution(model, 2.0, [1.0, 1.0])
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(ee.sigma(t), 2.0 * np.exp(model.rates.int_a(t)), rtol=1e-10)


def test_constant_rate_bernoulli_closed_form():
    # a = 0, D_a = 0 and constant b make kappa*beta constant
    t = np.linspace(0, 5, 6)
    rates = TabulatedRates(t, np.zeros(6), np.full(6, 0.3), np.zeros(6))
    model = CoefficientModel(rates, mu=0.5, kappa=1.0, D=0.01)
    ee = EESolution(model, 1.0, [1.0, 1.0], horizon=5.0)
    k = model.kappa * ee.beta_eff(0.0)
    s = np.linspace(0, 5, 17)
    np.testing.assert_allclose(ee.sigma(s), 1.0 / np.sqrt(1 + 2 * k * s), rtol=1e-10)


def test_d_matrix_and_alpha(ee085, model):
    t = 1.3
    d = d_matrix(ee085, t)
    I = 0.5 * (1 - math.exp(-t))
    np.testing.assert_allclose(np.diag(d), ee085.d_bar + I, rtol=1e-14)
    assert d[0, 1] == 0.0
    np.testing.assert_allclose(alpha2(ee085, t), 2 * model.D * d, rtol=1e-14)


def test_action_matches_quadrature(ee085):
    ref, _ = quad(lambda s: float(ee085.action_rate(s)), 0.0, 3.0, epsabs=1e-13, epsrel=1e-12)
    assert action_S(ee085, 3.0) == pytest.approx(ref, rel=1e-9)
    assert action_S(ee085, 0.0) == 0.0


def test_fig1_ordering(ee085, ee1):
    t = np.linspace(0, 5, 51)
    s85, s1 = ee085.sigma(t), ee1.sigma(t)
    assert np.all(s85 > 0) and np.all(s1 > 0)
    assert s85[0] > s1[0]
    assert abs(s85[-1] - s1[-1]) / s1[-1] < abs(s85[0] - s1[0]) / s1[0]


def test_horizon_enforced(ee085):
    with pytest.raises(DomainError):
        ee085.sigma(5.5)


def test_negative_recombination_warns():
    model = CoefficientModel(kappa=0.0, D=0.04)
    with pytest.warns(ModelWarning):
        EESolution(model, 1.0, [1.5, 1.5], horizon=1.0)


def test_blowup_detected():
    # D = 0.04 drives the effective recombination negative and sigma blows up
    model = CoefficientModel(D=0.04)
    m = double_gaussian_moments(1, 1.5, 1, 0.85, 0.04)
    with pytest.raises(SingularSolutionError):
        EESolution(model, m.sigma, np.diag(m.alpha2) / 0.08, horizon=1.0)


def test_moments_from_field():
    g = GridSpec.square(1.0, 401)
    X = np.stack(g.mesh(), -1)
    f = double_gaussian(X, 1, 1.5, 1, 0.85, 0.01)
    m = moments_from_field(f, g)
    ref = double_gaussian_moments(1, 1.5, 1, 0.85, 0.01)
    assert m.sigma == pytest.approx(ref.sigma, rel=1e-12)
    np.testing.assert_allclose(m.alpha2, ref.alpha2, atol=1e-15, rtol=1e-10)
    np.testing.assert_allclose(m.x_center, 0.0, atol=1e-15)
    assert m.quad_error < 1e-10
    with pytest.raises(DegenerateMassError):
        moments_from_field(np.zeros(g.shape), g)


def test_match_constants(model):
    ref = double_gaussian_moments(1, 1.5, 1, 0.85, 0.01)
    ee = match_constants(ref, model)
    # d_bar = alpha / (2D) = (g1^2 - eps g2^2) / (2 (g1 - eps g2))
    np.testing.assert_allclose(ee.d_bar, 1.4 / 1.3, rtol=1e-12)
    with pytest.raises(AnisotropyError):
        match_constants(MomentState(1.0, [0, 0], [[0.01, 0.001], [0.001, 0.01]]), model)
    with pytest.raises(AnisotropyError):
        match_constants(MomentState(1.0, [0.1, 0], np.diag([0.01, 0.01])), model)
    with pytest.raises(DegenerateMassError):
        match_constants(MomentState(0.0, [0, 0], np.diag([0.01, 0.01])), model)
