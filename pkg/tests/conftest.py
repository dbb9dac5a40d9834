import sys
import warnings

import numpy as np
import pytest

from nonlocal_kinetics import CoefficientModel, DoubleGaussian, EESolution, GermParams, build_solution
from nonlocal_kinetics.hermite import double_gaussian_moments, optimal_beta
from nonlocal_kinetics.variational import integrate_germ

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    lines = list(ACCEPTANCE_LINES)
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance") and hasattr(module, "acceptance_lines"):
            lines.extend(module.acceptance_lines())
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def model():
    return CoefficientModel()


@pytest.fixture(scope="session")
def beta_opt():
    return optimal_beta(1.5, 1.0)


def _ee(model, eps):
    m = double_gaussian_moments(1.0, 1.5, 1.0, eps, model.D)
    return EESolution(model, m.sigma, np.diag(m.alpha2) / (2 * model.D), horizon=5.0)


@pytest.fixture(scope="session")
def ee085(model):
    return _ee(model, 0.85)


@pytest.fixture(scope="session")
def ee1(model):
    return _ee(model, 1.0)


@pytest.fixture(scope="session")
def germ085(ee085, beta_opt):
    return integrate_germ(ee085, GermParams.isotropic(beta_opt), 5.0, 1e-3)


@pytest.fixture(scope="session")
def field085(model):
    return build_solution(DoubleGaussian(eps=0.85), model)


@pytest.fixture(scope="session")
def field1(model):
    return build_solution(DoubleGaussian(eps=1.0), model)


@pytest.fixture(autouse=True)
def _no_model_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        yield
