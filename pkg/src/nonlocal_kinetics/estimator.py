"""scikit-learn style front ends.

:class:`KineticSuperposition` wraps the whole pipeline: ``fit`` projects the
initial data, matches the moment constants and integrates the germ;
``predict`` evaluates the reconstructed field.  :class:`HermiteProjector`
maps gridded fields to coefficient tables and back.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .coefficients import CoefficientModel, ExponentialRelaxation
from .grid import GridSpec
from .hermite import HermiteExpansion, project_ic
from .solver import DoubleGaussian, build_solution, tail_optimal_beta
from .validation import check_field, check_fields, check_points, check_time
from .variational import GermParams


def _germ_params(beta):
    if beta == "auto":
        return "auto"
    b = np.broadcast_to(np.asarray(beta, dtype=float), (2,))
    return GermParams(float(b[0]), float(b[1]))


class KineticSuperposition(BaseEstimator):
    """Asymptotic solution of the nonlocal kinetic equation from initial data.

    Parameters
    ----------
    rates : ExponentialRelaxation or TabulatedRates, optional
        Coefficient functions; defaults to the exponential relaxation family.
    D, mu, kappa : float
        Diffusion scale, kernel width and nonlinearity strength.
    n_max : int
        Truncation per axis of the Hermite expansion.
    beta : "auto", float or pair of floats
        Germ parameters.
    T, dt : float
        Horizon and RK4 step of the germ.
    """

    def __init__(self, rates=None, D=0.01, mu=0.5, kappa=1.0, n_max=8, beta="auto", T=5.0,
                 dt=1e-3, N0=1.0):
        self.rates = rates
        self.D = D
        self.mu = mu
        self.kappa = kappa
        self.n_max = n_max
        self.beta = beta
        self.T = T
        self.dt = dt
        self.N0 = N0

    def _model(self):
        return CoefficientModel(self.rates if self.rates is not None else ExponentialRelaxation(),
                                mu=self.mu, kappa=self.kappa, D=self.D)

    def fit(self, X, y=None, grid: GridSpec | None = None):
        """Build the solution.

        ``X`` is a :class:`DoubleGaussian` or a field sampled on ``grid``.
        """
        if not isinstance(X, DoubleGaussian):
            if grid is None:
                raise ValueError("a gridded initial condition needs grid=")
            X = check_field(X, grid)
        self.field_ = build_solution(X, self._model(), _germ_params(self.beta), self.n_max, self.T,
                                     self.dt, grid=grid, N0=self.N0)
        self.ee_ = self.field_.ee
        self.trajectory_ = self.field_.traj
        self.expansion_ = self.field_.expansion
        self.germ_params_ = self.field_.traj.params
        self.validity_end_ = self.field_.validity_end
        return self

    def predict(self, X, t=0.0):
        """Field values at points ``X`` of shape ``(n_samples, 2)`` and time ``t``."""
        check_is_fitted(self, "field_")
        return np.atleast_1d(self.field_.evaluate(check_points(X), check_time(t)))

    def sigma(self, t):
        check_is_fitted(self, "field_")
        return self.ee_.sigma(t)


class HermiteProjector(TransformerMixin, BaseEstimator):
    """Gridded fields to flattened coefficient tables ``k[n1, n2]`` and back.

    Parameters
    ----------
    grid : GridSpec
    D : float
    n_max : int
    beta : "auto", float or pair of floats
        ``"auto"`` minimises the coefficient tail of the first fitted field.
    """

    def __init__(self, grid=None, D=0.01, n_max=8, beta="auto"):
        self.grid = grid
        self.D = D
        self.n_max = n_max
        self.beta = beta

    def _grid(self):
        return self.grid if self.grid is not None else GridSpec()

    def fit(self, X, y=None):
        X = check_fields(X, self._grid())
        params = _germ_params(self.beta)
        if params == "auto":
            params = GermParams.isotropic(tail_optimal_beta(X[0], self._grid(), self.D, self.n_max))
        self.germ_params_ = params
        self.n_features_in_ = X[0].size
        return self

    def transform(self, X):
        check_is_fitted(self, "germ_params_")
        X = check_fields(X, self._grid())
        return np.array([project_ic(f, self._grid(), self.germ_params_, self.D, self.n_max).coeffs.ravel()
                         for f in X])

    def inverse_transform(self, K):
        check_is_fitted(self, "germ_params_")
        K = np.atleast_2d(np.asarray(K, dtype=float))
        size = self.n_max + 1
        if K.shape[1] != size * size:
            raise ValueError(f"expected {size * size} coefficients per row, got {K.shape[1]}")
        pts = np.stack(self._grid().mesh(), -1)
        return np.array([HermiteExpansion(k.reshape(size, size), self.germ_params_, self.D).evaluate_initial(pts)
                         for k in K])
