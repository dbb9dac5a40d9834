import numpy as np
import pytest

from nonlocal_kinetics.grid import GridSpec, integrate, integrate_with_error, trapezoid_weights


def test_validation():
    with pytest.raises(ValueError):
        GridSpec((1.0, 0.0, 11))
    with pytest.raises(ValueError):
        GridSpec((0.0, 1.0, 1))
    with pytest.raises(ValueError):
        GridSpec((0.0, 1.0, 2.5))


def test_shape_spacing_mesh():
    g = GridSpec((-1, 1, 5), (0, 2, 3))
    assert g.shape == (5, 3)
    assert g.spacing == (0.5, 1.0)
    X1, X2 = g.mesh()
    assert X1.shape == (5, 3) and X1[1, 0] == -0.5 and X2[0, 2] == 2.0


def test_trapezoid_weights_sum():
    w = trapezoid_weights(11, 0.1)
    assert w.sum() == pytest.approx(1.0)


def test_gaussian_integral_and_error_estimate():
    g = GridSpec.square(1.0, 201)
    X1, X2 = g.mesh()
    s = 0.1
    f = np.exp(-(X1**2 + X2**2) / (2 * s**2))
    exact = 2 * np.pi * s**2
    val, err = integrate_with_error(f, g)
    assert val == pytest.approx(exact, rel=1e-12)
    assert err < 1e-10
    assert integrate(f, g) == val


def test_error_estimate_needs_odd_points():
    g = GridSpec.square(1.0, 200)
    _, err = integrate_with_error(np.ones(g.shape), g)
    assert np.isnan(err)
