"""Second-order moment (Einstein-Ehrenfest) system for the 2D specialisation.

With ``a(x, t) = a(t)`` and the Gaussian kernel the centre stays at the
origin, the second moments grow linearly in ``int D_a`` and the mass obeys the
Bernoulli equation

    dsigma/dt = a(t) sigma - kappa beta(t) sigma^3 .

Substituting ``z = sigma^{-2}`` makes it linear, ``dz/dt = -2 a z + 2 kappa
beta``, so

    z(t) = varpi(t, 0) / sigma(0)^2 + 2 kappa int_0^t beta(tau) varpi(t, tau) dtau,
    sigma(t) = z(t)^{-1/2},

with ``varpi(t, tau) = exp(-2 int_tau^t a)``.  :class:`EESolution` tabulates
``z`` on a refined mesh with cubic Hermite interpolation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .coefficients import CoefficientModel, _check_time
from .errors import (AnisotropyError, DegenerateMassError, DomainError, ModelWarning,
                     SingularSolutionError)
from .grid import GridSpec, integrate, integrate_with_error

MESH_TOL = 1e-9
DIAGONAL_TOL = 1e-8
CENTRE_TOL = 1e-8

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class MomentState:
    """Mass, centre and central second-moment matrix of a field."""

    sigma: float
    x_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    alpha2: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    quad_error: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "x_center", np.asarray(self.x_center, dtype=float).reshape(2))
        object.__setattr__(self, "alpha2", np.asarray(self.alpha2, dtype=float).reshape(2, 2))


def moments_from_field(samples, grid: GridSpec) -> MomentState:
    """Moments of a gridded field by tensor trapezoid quadrature.

    ``quad_error`` carries a Richardson estimate of the mass error.
    """
    phi = np.asarray(samples, dtype=float)
    if phi.shape != grid.shape:
        raise ValueError(f"field shape {phi.shape} does not match grid {grid.shape}")
    x1, x2 = grid.mesh()
    sigma, err = integrate_with_error(phi, grid)
    if abs(sigma) < 1e-12 * phi.size:
        raise DegenerateMassError(f"initial mass vanishes (sigma = {sigma:.3e})")
    xc = np.array([integrate(x1 * phi, grid), integrate(x2 * phi, grid)]) / sigma
    d1, d2 = x1 - xc[0], x2 - xc[1]
    a11 = integrate(d1 * d1 * phi, grid) / sigma
    a12 = integrate(d1 * d2 * phi, grid) / sigma
    a22 = integrate(d2 * d2 * phi, grid) / sigma
    return MomentState(sigma, xc, np.array([[a11, a12], [a12, a22]]), err)


class EESolution:
    """Moment trajectory fixed by the constants ``(sigma(0), d_bar)``.

    Parameters
    ----------
    model : CoefficientModel
    c_squared : float
        Initial mass ``sigma(0) = c^2``.
    d_bar : array_like, shape (2,)
        Diagonal of the initial localisation matrix; ``alpha2(0) = 2 D diag(d_bar)``.
    horizon : float
        Right end of the cached time interval.
    """

    def __init__(self, model: CoefficientModel, c_squared: float, d_bar, horizon: float = 5.0):
        d_bar = np.asarray(d_bar, dtype=float).reshape(-1)
        if d_bar.size == 1:
            d_bar = np.repeat(d_bar, 2)
        if not c_squared > 0:
            raise DegenerateMassError(f"sigma(0) must be positive, got {c_squared}")
        if d_bar.shape != (2,) or np.any(d_bar <= 0):
            raise ValueError(f"d_bar must hold two positive entries, got {d_bar}")
        if not horizon > 0:
            raise DomainError("horizon must be positive")
        if horizon > model.rates.t_max:
            raise DomainError(f"horizon {horizon} exceeds coefficient table end {model.rates.t_max}")
        self.model = model
        self.c_squared = float(c_squared)
        self.d_bar = d_bar
        self.horizon = float(horizon)
        self._build_cache()

    # -- closed-form pieces -------------------------------------------------
    def d_matrix(self, t):
        """``d(t) = d_bar + I int_0^t D_a``; returns the (..., 2) diagonal."""
        t = _check_time(t)
        return self.d_bar + np.asarray(self.model.rates.int_diffusion(t))[..., None]

    def trace_d(self, t):
        t = _check_time(t)
        return self.d_bar.sum() + 2.0 * np.asarray(self.model.rates.int_diffusion(t))

    def beta_eff(self, t):
        m = self.model
        return m.b(t) * (1.0 - 4.0 * m.D * self.trace_d(t) / m.mu**2)

    def alpha2(self, t):
        """Diagonal of ``alpha2(t) = 2 D d(t)``."""
        return 2.0 * self.model.D * self.d_matrix(t)

    # -- cached mass --------------------------------------------------------
    def _z_parts(self, lo, hi):
        """Gauss-Legendre integral of ``beta * exp(2A)`` over each ``[lo_i, hi_i]``."""
        half = 0.5 * (hi - lo)
        tau = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_X[None, :]
        vals = self.beta_eff(tau) * np.exp(2.0 * self.model.rates.int_a(tau))
        return half * (vals @ _GL_W)

    def _z_direct(self, nodes, J):
        A = self.model.rates.int_a(nodes)
        return np.exp(-2.0 * A) * (1.0 / self.c_squared**2 + 2.0 * self.model.kappa * J)

    def _z_dot(self, t, z):
        m = self.model
        return -2.0 * m.a(t) * z + 2.0 * m.kappa * self.beta_eff(t)

    def _build_cache(self):
        m = self.model
        knots = m.rates.knots
        n = 2048
        while True:
            nodes = np.union1d(np.linspace(0.0, self.horizon, n + 1),
                               knots[(knots > 0) & (knots < self.horizon)])
            lo, hi = nodes[:-1], nodes[1:]
            J = np.concatenate([[0.0], np.cumsum(self._z_parts(lo, hi))])
            z = self._z_direct(nodes, J)
            spline = CubicHermiteSpline(nodes, z, self._z_dot(nodes, z))
            mid = 0.5 * (lo + hi)
            z_mid = self._z_direct(mid, J[:-1] + self._z_parts(lo, mid))
            err = np.max(np.abs(spline(mid) - z_mid) / np.abs(z_mid))
            if err < MESH_TOL or n >= 2**16:
                break
            n *= 2
        if np.any(z <= 0):
            k = int(np.argmax(z <= 0))
            raise SingularSolutionError(f"z(t) <= 0 near t = {nodes[k]:.4g}: sigma blows up")
        beta = self.beta_eff(nodes)
        if np.any(beta <= 0):
            warnings.warn(f"effective recombination beta(t) <= 0 at t = {nodes[np.argmax(beta <= 0)]:.4g};"
                          " outside the semiclassical regime", ModelWarning, stacklevel=3)
        self.mesh = nodes
        self.mesh_error = float(err)
        self._z = spline
        # action S(t) on the same mesh, integrand evaluated through the z spline
        half = 0.5 * (hi - lo)
        tau = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_X[None, :]
        s_parts = half * (self._action_rate(tau) @ _GL_W)
        S = np.concatenate([[0.0], np.cumsum(s_parts)])
        self._S = CubicHermiteSpline(nodes, S, self._action_rate(nodes))

    def _check_horizon(self, t):
        t = _check_time(t)
        if np.any(t > self.horizon * (1 + 1e-12)):
            raise DomainError(f"t beyond the EE solution horizon {self.horizon}")
        return t

    def z(self, t):
        return self._z(self._check_horizon(t))

    def sigma(self, t):
        """Total mass ``sigma(t) = z(t)^{-1/2}``."""
        z = self.z(t)
        if np.any(z <= 0):
            raise SingularSolutionError("z(t) <= 0: sigma blows up")
        out = z**-0.5
        return float(out) if np.ndim(out) == 0 else out

    def _action_rate(self, t):
        m = self.model
        sig2 = self._z(t) ** -1.0
        return m.D * (m.a(t) - m.kappa * m.b(t) * sig2 * (1.0 - 2.0 * m.D * self.trace_d(t) / m.mu**2))

    def action_S(self, t):
        """``S(t, D) = D int_0^t [a - kappa b sigma^2 (1 - 2 D Sp d / mu^2)]``."""
        out = self._S(self._check_horizon(t))
        return float(out) if np.ndim(out) == 0 else out

    def action_rate(self, t):
        """``dS/dt`` evaluated directly from the integrand."""
        return self._action_rate(self._check_horizon(t))

    def state(self, t) -> MomentState:
        return MomentState(self.sigma(t), np.zeros(2), np.diag(self.alpha2(t)))


def d_matrix(sol: EESolution, t):
    return np.diag(sol.d_matrix(float(t)))


def beta_eff(sol: EESolution, t):
    return sol.beta_eff(t)


def sigma(sol: EESolution, t):
    return sol.sigma(t)


def alpha2(sol: EESolution, t):
    return np.diag(sol.alpha2(float(t)))


def action_S(sol: EESolution, t):
    return sol.action_S(t)


def sigma_ode_check(sol: EESolution, t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 on ``dsigma/dt = a sigma - kappa beta sigma^3`` from ``sigma(0) = c^2``.

    Independent of the quadrature route in :meth:`EESolution.sigma`.
    """
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    m = sol.model
    n = max(1, int(round(t_end / dt)))
    h = t_end / n
    t = np.linspace(0.0, t_end, n + 1)
    half = t[:-1] + 0.5 * h
    a0, ah = m.a(t), m.a(half)
    b0, bh = sol.beta_eff(t) * m.kappa, sol.beta_eff(half) * m.kappa

    out = np.empty(n + 1)
    s = out[0] = sol.c_squared
    for k in range(n):
        k1 = a0[k] * s - b0[k] * s**3
        y = s + 0.5 * h * k1
        k2 = ah[k] * y - bh[k] * y**3
        y = s + 0.5 * h * k2
        k3 = ah[k] * y - bh[k] * y**3
        y = s + h * k3
        k4 = a0[k + 1] * y - b0[k + 1] * y**3
        s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.isfinite(s) and s > 0):
            raise SingularSolutionError(f"sigma left (0, inf) at t = {t[k + 1]:.4g}")
        out[k + 1] = s
    return t, out


def match_constants(ic_moments: MomentState, model: CoefficientModel,
                    horizon: float = 5.0) -> EESolution:
    """EE solution whose moments at ``t = 0`` equal those of the initial data."""
    a = ic_moments.alpha2
    tr = np.trace(a)
    if not tr > 0:
        raise AnisotropyError(f"second moments must be positive, got trace {tr}")
    if abs(a[0, 1]) / tr > DIAGONAL_TOL or abs(a[1, 0]) / tr > DIAGONAL_TOL:
        raise AnisotropyError(f"second-moment matrix is not diagonal (off/trace = {abs(a[0, 1]) / tr:.2e})")
    if np.linalg.norm(ic_moments.x_center) > CENTRE_TOL * np.sqrt(tr):
        raise AnisotropyError(f"initial centre {ic_moments.x_center} is not at the origin")
    if abs(ic_moments.sigma) == 0:
        raise DegenerateMassError("initial mass vanishes")
    return EESolution(model, ic_moments.sigma, np.diag(a) / (2.0 * model.D), horizon)
