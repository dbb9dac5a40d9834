import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nonlocal_kinetics import (CoefficientModel, DoubleGaussian, ExponentialRelaxation, GermParams, GridSpec,
                               HermiteExpansion, build_solution, single_mode_solution)
from nonlocal_kinetics.errors import DomainError, GermDegeneracyError, ResolutionError
from nonlocal_kinetics.solver import (SolutionField, ale_residual, apply_ladder_check, central_dip,
                                      convolution_grid, evaluate, evaluate_grid, kernel_convolution,
                                      moments_check, nonlocal_residual)

PTS = np.array([(0.0, 0.0), (0.2, 0.0), (0.1, 0.1)])


def exact_components(field, gammas, weights):
    """Each Gaussian component evolves on its own under the linear operator."""
    ee, m = field.ee, field.model
    D = m.D

    def rhs(t, y):
        bt = m.kappa / m.mu**2 * D * m.b(t) * ee.sigma(t) ** 2
        pot = m.a(t) - m.kappa * m.b(t) * ee.sigma(t) ** 2 * (1 - 2 * D * ee.trace_d(t) / m.mu**2)
        Q, logA = y[: len(gammas)], y[len(gammas):]
        return np.concatenate([2 * m.diffusion(t) * Q**2 + 2 * bt, 2 * m.diffusion(t) * Q + pot])

    y0 = np.concatenate([-1 / np.array(gammas), np.zeros(len(gammas))])
    sol = solve_ivp(rhs, (0, ee.horizon), y0, rtol=1e-12, atol=1e-14, dense_output=True)

    def value(x, t):
        y = sol.sol(t)
        r2 = np.sum(np.asarray(x) ** 2, axis=-1)
        return sum(w / D * np.exp(y[len(gammas) + i] + y[i] * r2 / (2 * D)) for i, w in enumerate(weights))

    return value


def test_reconstruction_at_zero(field085):
    x = np.array([(0.05, 0.03), (0.0, 0.1), (-0.2, 0.15)])
    np.testing.assert_allclose(evaluate(field085, x, 0.0), field085.expansion.evaluate_initial(x), rtol=1e-13)


def test_unit_mode_at_origin(model, germ085, ee085):
    f = SolutionField(ee085, germ085, HermiteExpansion([[1.0]], germ085.params, model.D))
    assert f.evaluate([0.0, 0.0], 0.0) == pytest.approx(100.0, rel=1e-15)


def test_field_matches_component_oracle(field085):
    exact = exact_components(field085, [1.5, 1.0], [1.0, -0.85])
    x = np.array([(0.0, 0.0), (0.1, -0.05), (0.25, 0.2)])
    for t in (1.0, 3.0, 5.0):
        np.testing.assert_allclose(field085.evaluate(x, t), exact(x, t), rtol=1e-5)


def test_removable_crossing(beta_opt):
    # Z(+) crosses zero near t = 0.37; the field stays regular and exact
    model = CoefficientModel(ExponentialRelaxation(d1=2.0), kappa=0.0)
    f = build_solution(DoubleGaussian(1.0, 1.2, 1.0, 0.0), model, GermParams.isotropic(beta_opt), n_max=16)
    assert {(e.name, e.axis) for e in f.traj.events} == {("Z+", 1), ("Z+", 2)}
    t_cross = f.traj.events[0].time
    x = np.array([(0.0, 0.0), (0.15, 0.1)])
    for t in (t_cross - 1e-3, t_cross, t_cross + 1e-3, 3.0):
        I = model.rates.int_diffusion(t)
        g = 1.2 + 2 * I
        exact = math.exp(model.rates.int_a(t)) * 1.2 / g / model.D * np.exp(-np.sum(x**2, -1) / (2 * model.D * g))
        np.testing.assert_allclose(f.evaluate(x, t), exact, rtol=1e-6)


def test_grid_evaluation(field085):
    g = GridSpec.square(0.5, 41)
    V = evaluate_grid(field085, g, [0.0, 2.0])
    assert V.shape == (2, 41, 41)
    X = np.stack(g.mesh(), -1)
    np.testing.assert_allclose(V[1], field085.evaluate(X, 2.0), rtol=1e-13)
    # parity in both axes
    assert np.max(np.abs(V[1] - V[1][::-1, :])) < 1e-12 * np.abs(V[1]).max()
    assert np.max(np.abs(V[1] - V[1][:, ::-1])) < 1e-12 * np.abs(V[1]).max()
    single = GridSpec((0.1, 0.2, 2), (0.0, 0.3, 2))
    assert evaluate_grid(field085, single, [1.0])[0, 0, 0] == pytest.approx(field085.evaluate([0.1, 0.0], 1.0))


def test_linearity_in_coefficients(field085):
    K = field085.expansion.coeffs.copy()
    K2 = K.copy()
    K2[2, 0] *= 2
    g = SolutionField(field085.ee, field085.traj, HermiteExpansion(K2, field085.expansion.params, field085.D))
    e = np.zeros_like(K)
    e[2, 0] = K[2, 0]
    h = SolutionField(field085.ee, field085.traj, HermiteExpansion(e, field085.expansion.params, field085.D))
    x = np.array([(0.05, 0.1)])
    assert g.evaluate(x, 1.5)[0] == pytest.approx(field085.evaluate(x, 1.5)[0] + h.evaluate(x, 1.5)[0], rel=1e-13)
    r = ale_residual(field085, x, 1.0) + ale_residual(h, x, 1.0)
    assert ale_residual(g, x, 1.0)[0] == pytest.approx(r[0], abs=1e-9 * abs(g.evaluate(x, 1.0)[0]))


def test_ale_residual_small(field085):
    for t in (0.5, 1.0, 2.0):
        assert np.all(np.abs(ale_residual(field085, PTS, t)) / np.abs(field085.evaluate(PTS, t)) < 1e-5)


def test_linear_case_residuals(beta_opt):
    model = CoefficientModel(kappa=0.0)
    f = build_solution(DoubleGaussian(1.0, 1.5, 1.0, 0.0), model)
    v = f.evaluate(PTS, 1.0)
    ale = ale_residual(f, PTS, 1.0)
    assert np.all(np.abs(ale / v) < 1e-8)
    nl = nonlocal_residual(f, PTS, 1.0, GridSpec.square(1.0, 21))
    np.testing.assert_array_equal(nl, ale)


def test_time_derivative_needs_room(field085):
    with pytest.raises(DomainError):
        ale_residual(field085, PTS, 0.0)


def test_kernel_convolution_closed_form(model):
    gamma = 1.5
    f = build_solution(DoubleGaussian(1.0, gamma, 1.0, 0.0), model, GermParams.isotropic(1 / gamma))
    s2, mu2 = gamma * model.D, model.mu**2
    x = np.array([(0.0, 0.0), (0.3, -0.2)])
    per_axis = math.sqrt(2 * math.pi * mu2 * s2 / (mu2 + s2))
    exact = per_axis**2 / model.D * np.exp(-np.sum(x**2, -1) / (2 * (mu2 + s2)))
    got = kernel_convolution(f, x, 0.0, GridSpec.square(1.5, 301))
    np.testing.assert_allclose(got, exact, rtol=1e-10)
    with pytest.raises(ResolutionError):
        kernel_convolution(f, x, 0.0, GridSpec.square(0.2, 301))
    with pytest.raises(ResolutionError):
        kernel_convolution(f, x, 0.0, GridSpec.square(1.5, 11))


def test_validity_interval_enforced(model):
    p = GermParams(0.8, 1.2)
    f = single_mode_solution((2, 0), model, p)
    assert f.validity_end < 5.0
    with pytest.raises(GermDegeneracyError):
        f.evaluate([0.0, 0.0], 4.99)


def test_single_mode_nodal_lines(model, beta_opt):
    f = single_mode_solution((2, 0), model, GermParams.isotropic(beta_opt), T=1.0)
    x1 = np.linspace(-0.5, 0.5, 1001)
    v = f.evaluate(np.stack([x1, np.full_like(x1, 0.03)], -1), 0.0)
    assert np.count_nonzero(np.diff(np.sign(v))) == 2
    zeros = x1[:-1][np.diff(np.sign(v)) != 0]
    np.testing.assert_allclose(np.abs(zeros), math.sqrt(model.D / beta_opt / 2), atol=1e-3)


def test_single_mode_moments_at_zero(model, beta_opt):
    from nonlocal_kinetics.ee_system import moments_from_field
    from nonlocal_kinetics.hermite import mode_constants
    p = GermParams.isotropic(beta_opt)
    f = single_mode_solution((2, 2), model, p, T=0.1)
    g = GridSpec.square(1.0, 401)
    m = moments_from_field(f.evaluate_grid(g, [0.0])[0], g)
    mc = mode_constants((2, 2), p, model.D)
    assert m.sigma == pytest.approx(mc.c_squared, rel=1e-9)
    np.testing.assert_allclose(np.diag(m.alpha2), 2 * model.D * mc.d_bar, rtol=1e-9)


def test_ladder_check(model, beta_opt):
    v0 = single_mode_solution((0, 0), model, GermParams(beta_opt, 1.1))
    for t in (0.0, 1.0, 4.0):
        for rep in apply_ladder_check(v0, t, GridSpec.square(1.0, 201)):
            assert rep.nullification <= 1e-10
            assert rep.raising_deviation <= 1e-6
            assert rep.commutator_deviation <= 1e-6
    with pytest.raises(ValueError):
        apply_ladder_check(build_solution(DoubleGaussian(), model), 1.0, GridSpec())


def test_central_dip_at_start(model, field1):
    assert central_dip(field1, 0.0)
    assert not central_dip(build_solution(DoubleGaussian(eps=0.0), model), 0.0)


@pytest.mark.xfail(strict=True, reason="the linear-operator mass drifts from the moment-system mass; see notes")
def test_grid_mass_tracks_moment_mass(field085):
    rows = moments_check(field085, GridSpec.square(2.0, 401), [0.0, 1.0, 2.0, 5.0])
    assert max(r[3] for r in rows) < 1e-4


def test_grid_mass_at_start(field085):
    (row,) = moments_check(field085, GridSpec.square(1.0, 401), [0.0])
    # truncation at n_max = 8 is the only error
    assert row[3] < 1e-4
