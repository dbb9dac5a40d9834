"""Reconstructed fields, residual diagnostics and the ladder-operator check.

The reconstructed field is

    v(x, t) = exp(S/D + phi) / D * sum_n k_n P_{n1}(c1 x1; s1) P_{n2}(c2 x2; s2)
              * exp(q1 x1^2 + q2 x2^2),

with ``c_i = sqrt(beta_i/D) / Z_i(-)``, ``s_i = Z_i(+)/Z_i(-)`` and
``q_i = Q_i / (2D)``.  Each axis factor ``g = P(c x) exp(q x^2)`` has the
analytic derivatives

    g'  = (c P' + 2 q x P) exp(q x^2),
    g'' = (c^2 P'' + 4 q x c P' + (2 q + 4 q^2 x^2) P) exp(q x^2),

where ``P_n' = 2 n P_{n-1}``, so the Laplacian never needs finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .coefficients import CoefficientModel
from .ee_system import EESolution, MomentState, match_constants, moments_from_field
from .errors import DomainError, ResolutionError
from .grid import GridSpec, integrate, trapezoid_weights
from .hermite import (POINTS_PER_OSCILLATION, HermiteExpansion, double_gaussian,
                      double_gaussian_moments, gaussian_ic_expansion, minimize_tail, mode_constants,
                      optimal_beta, project_ic, scaled_hermite_all)
from .variational import GermParams, VariationalTrajectory, integrate_germ

DT_FD = 1e-4
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class DoubleGaussian:
    """Named initial condition ``(N/D)[exp(-|x|^2/(2 g1 D)) - eps exp(-|x|^2/(2 g2 D))]``."""

    N: float = 1.0
    gamma1: float = 1.5
    gamma2: float = 1.0
    eps: float = 0.85

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gamma1 and gamma2 must be positive")

    def __call__(self, x, D):
        return double_gaussian(x, self.N, self.gamma1, self.gamma2, self.eps, D)

    def moments(self, D) -> MomentState:
        return double_gaussian_moments(self.N, self.gamma1, self.gamma2, self.eps, D)


def _axis_terms(n_max, x, c, s, q, order=0):
    """Axis factor ``P_j(c x; s) exp(q x^2)`` and, if asked, its first two x-derivatives."""
    x = np.asarray(x, dtype=float)
    P = scaled_hermite_all(n_max, c * x, s)
    env = np.exp(q * x**2)
    out = [P * env]
    if order >= 1:
        j = np.arange(n_max + 1).reshape((-1,) + (1,) * x.ndim)
        dP = np.zeros_like(P)
        dP[1:] = 2 * j[1:] * P[:-1]
        out.append((c * dP + 2 * q * x * P) * env)
    if order >= 2:
        d2P = np.zeros_like(P)
        d2P[2:] = 4 * j[2:] * (j[2:] - 1) * P[:-2]
        out.append((c**2 * d2P + 4 * q * x * c * dP + (2 * q + 4 * q**2 * x**2) * P) * env)
    return out


class SolutionField:
    """Truncated superposition of the time-dependent Hermite-Gauss modes.

    Parameters
    ----------
    ee : EESolution
        Moment trajectory whose constants were matched to the initial data.
    traj : VariationalTrajectory
    expansion : HermiteExpansion
        Coefficients ``k_n`` with the same germ parameters as ``traj``.
    """

    def __init__(self, ee: EESolution, traj: VariationalTrajectory, expansion: HermiteExpansion):
        if expansion.params != traj.params:
            raise ValueError("expansion and trajectory use different germ parameters")
        self.ee = ee
        self.traj = traj
        self.expansion = expansion
        self.model: CoefficientModel = ee.model

    @property
    def validity_end(self) -> float:
        return self.traj.validity_end

    @property
    def D(self) -> float:
        return self.model.D

    def _axis_data(self, t):
        self.traj.require_valid(t)
        g = self.traj.at(float(t))
        beta = self.traj.params.betas
        c = np.sqrt(beta / self.D) / g.Zm
        s = g.Zp / g.Zm
        q = g.Q / (2 * self.D)
        amp = math.exp(self.ee.action_S(t) / self.D + self.traj.phi(t)) / self.D
        return c, s, q, amp

    def _terms(self, x1, x2, t, order=0):
        c, s, q, amp = self._axis_data(t)
        n = self.expansion.n_max
        return _axis_terms(n, x1, c[0], s[0], q[0], order), _axis_terms(n, x2, c[1], s[1], q[1], order), amp

    def evaluate(self, x, t):
        """Field value at points ``x`` (last axis of length 2) and a scalar time."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2:
            raise ValueError("points need a trailing axis of length 2")
        (g1,), (g2,), amp = self._terms(x[..., 0], x[..., 1], t)
        out = amp * np.einsum("ij,i...,j...->...", self.expansion.coeffs, g1, g2)
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_grid(self, grid: GridSpec, times) -> np.ndarray:
        """Values on ``grid`` for each time; shape ``(len(times),) + grid.shape``."""
        ax1, ax2 = grid.axes()
        out = []
        for t in np.atleast_1d(np.asarray(times, dtype=float)):
            (g1,), (g2,), amp = self._terms(ax1, ax2, t)
            out.append(amp * g1.T @ self.expansion.coeffs @ g2)
        return np.array(out)

    def laplacian(self, x, t):
        x = np.asarray(x, dtype=float)
        (g1, _, h1), (g2, _, h2), amp = self._terms(x[..., 0], x[..., 1], t, order=2)
        K = self.expansion.coeffs
        return amp * (np.einsum("ij,i...,j...->...", K, h1, g2) + np.einsum("ij,i...,j...->...", K, g1, h2))

    def time_derivative(self, x, t, dt_fd=DT_FD):
        """Central finite difference in time."""
        if t - dt_fd < 0 or t + dt_fd > self.validity_end:
            raise DomainError(f"t +- dt_fd = [{t - dt_fd}, {t + dt_fd}] leaves the validity interval")
        return (np.asarray(self.evaluate(x, t + dt_fd)) - self.evaluate(x, t - dt_fd)) / (2 * dt_fd)

    def linear_potential(self, x, t):
        """``a - (kappa/mu^2) b sigma^2 (mu^2 - 2 D Sp d - |x|^2)`` with EE moments."""
        m = self.model
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x**2, axis=-1)
        return m.a(t) - m.kappa / m.mu**2 * m.b(t) * self.ee.sigma(t) ** 2 * (
            m.mu**2 - 2 * m.D * self.ee.trace_d(t) - r2)


def build_solution(ic, model: CoefficientModel, params="auto", n_max: int = 8, T: float = 5.0,
                   dt: float = 1e-3, grid: GridSpec | None = None, N0: float = 1.0) -> SolutionField:
    """Project the initial data, match the constants and integrate the germ.

    Parameters
    ----------
    ic : DoubleGaussian or array_like
        Named initial condition or values sampled on ``grid``.
    params : GermParams or "auto"
        ``"auto"`` uses the optimal isotropic parameter for double-Gaussian
        data and minimises the projected coefficient tail otherwise.
    """
    D = model.D
    if isinstance(ic, DoubleGaussian):
        moments = ic.moments(D)
        if params == "auto":
            params = GermParams.isotropic(optimal_beta(ic.gamma1, ic.gamma2))
        if params.beta1 == params.beta2:
            expansion = gaussian_ic_expansion(ic.N, ic.gamma1, ic.gamma2, ic.eps, params.beta1, D, n_max, N0)
        else:
            grid = grid or GridSpec.square(1.0, 401)
            expansion = project_ic(ic(np.stack(grid.mesh(), -1), D), grid, params, D, n_max, N0)
    else:
        if grid is None:
            raise ValueError("a gridded initial condition needs its grid")
        field = np.asarray(ic, dtype=float)
        moments = moments_from_field(field, grid)
        if params == "auto":
            params = GermParams.isotropic(tail_optimal_beta(field, grid, D, n_max, moments))
        expansion = project_ic(field, grid, params, D, n_max, N0)
    ee = match_constants(moments, model, horizon=T)
    traj = integrate_germ(ee, params, T, dt)
    return SolutionField(ee, traj, expansion)


def tail_optimal_beta(field, grid: GridSpec, D: float, n_max: int, moments: MomentState | None = None) -> float:
    """Isotropic germ parameter minimising the relative weight of the upper half of the table."""
    moments = moments or moments_from_field(field, grid)
    beta0 = D / float(np.mean(np.diag(moments.alpha2)))

    def tail(beta):
        try:
            k = np.abs(project_ic(field, grid, GermParams(beta, beta), D, n_max).coeffs)
        except ResolutionError:
            return 2.0  # worse than any resolved table, whose tail fraction is at most 1
        i, j = np.indices(k.shape)
        return float(k[i + j > n_max].sum() / k.sum())

    return minimize_tail(tail, (beta0 / 4, beta0 * 4))


def mode_field(n, ee: EESolution, traj: VariationalTrajectory, N0: float = 1.0) -> SolutionField:
    """The single mode ``v_n`` with ``N_n = N0`` on a given moment trajectory."""
    n1, n2 = int(n[0]), int(n[1])
    K = np.zeros((max(n1, n2) + 1,) * 2)
    K[n1, n2] = N0 * (-1) ** (n1 + n2) / math.sqrt(2.0 ** (n1 + n2) * math.factorial(n1) * math.factorial(n2))
    return SolutionField(ee, traj, HermiteExpansion(K, traj.params, ee.model.D, N0, source="mode"))


def single_mode_solution(n, model: CoefficientModel, params: GermParams, T: float = 5.0,
                         dt: float = 1e-3, N0: float = 1.0) -> SolutionField:
    """Standalone asymptotic solution built on the constants of the even mode ``n``."""
    mc = mode_constants(n, params, model.D, N0)
    ee = EESolution(model, mc.c_squared, mc.d_bar, horizon=T)
    return mode_field(n, ee, integrate_germ(ee, params, T, dt), N0)


# -- residuals --------------------------------------------------------------
def evaluate(field: SolutionField, x, t):
    return field.evaluate(x, t)


def evaluate_grid(field: SolutionField, grid: GridSpec, times):
    return field.evaluate_grid(grid, times)


def ale_residual(field: SolutionField, x, t, dt_fd: float = DT_FD):
    """Associated linear operator applied to the field.

    ``-dv/dt + D D_a lap v + [a - (kappa/mu^2) b sigma^2 (mu^2 - 2 D Sp d - |x|^2)] v``
    with the spatial part analytic and the time derivative by central differences.
    """
    m = field.model
    v = np.asarray(field.evaluate(x, t))
    out = (-field.time_derivative(x, t, dt_fd) + m.D * m.diffusion(t) * field.laplacian(x, t)
           + field.linear_potential(x, t) * v)
    return float(out) if np.ndim(out) == 0 else out


def check_convolution_grid(field: SolutionField, grid: GridSpec, t, values=None):
    """Raise :class:`ResolutionError` unless ``grid`` resolves the field at ``t`` and the kernel.

    The spacing must resolve the highest mode and the kernel width; the field
    on the grid boundary must be negligible (``BOUNDARY_TOL`` relative).
    """
    g = field.traj.at(float(t))
    n = field.expansion.n_max
    for h, Q, label in zip(grid.spacing, g.Q, ("x1", "x2")):
        if Q >= 0:
            raise ResolutionError(f"{label}: field has no Gaussian envelope at t = {t}")
        wavelength = 2 * math.pi / math.sqrt(2 * n + 1) * math.sqrt(field.D / -Q)
        if h > min(wavelength, 2 * math.pi * field.model.mu) / POINTS_PER_OSCILLATION:
            raise ResolutionError(f"{label}: spacing {h:.3g} under-resolves the field (length {wavelength:.3g})")
    V = field.evaluate_grid(grid, [t])[0] if values is None else values
    edge = max(np.abs(V[[0, -1], :]).max(), np.abs(V[:, [0, -1]]).max())
    if edge > BOUNDARY_TOL * np.abs(V).max():
        raise ResolutionError(f"field on the grid boundary is {edge / np.abs(V).max():.2e} of its peak")
    return V


def convolution_grid(field: SolutionField, t, points: int = 201) -> GridSpec:
    """Square grid wide enough for the envelope at ``t`` (ten envelope lengths)."""
    Q = field.traj.at(float(t)).Q
    if np.any(Q >= 0):
        raise ResolutionError(f"field has no Gaussian envelope at t = {t}")
    return GridSpec.square(10.0 * math.sqrt(field.D / float(np.min(-Q))), points)


def kernel_convolution(field: SolutionField, x, t, conv_grid: GridSpec):
    """``int exp(-|x - y|^2 / (2 mu^2)) v(y, t) dy`` by tensor trapezoid quadrature."""
    V = check_convolution_grid(field, conv_grid, t)
    ax1, ax2 = conv_grid.axes()
    h1, h2 = conv_grid.spacing
    x = np.asarray(x, dtype=float)
    mu2 = 2 * field.model.mu**2
    K1 = np.exp(-(x[..., 0, None] - ax1) ** 2 / mu2) * trapezoid_weights(len(ax1), h1)
    K2 = np.exp(-(x[..., 1, None] - ax2) ** 2 / mu2) * trapezoid_weights(len(ax2), h2)
    return np.einsum("...i,ij,...j->...", K1, V, K2)


def nonlocal_residual(field: SolutionField, x, t, conv_grid: GridSpec, dt_fd: float = DT_FD):
    """Kinetic operator applied to the field, oriented like :func:`ale_residual`.

    ``-dv/dt + D D_a lap v + a v - kappa b v [G_mu * v]^2``; for ``kappa = 0``
    it coincides with the associated linear residual.
    """
    m = field.model
    v = np.asarray(field.evaluate(x, t))
    out = -field.time_derivative(x, t, dt_fd) + m.D * m.diffusion(t) * field.laplacian(x, t) + m.a(t) * v
    if m.kappa != 0:
        out = out - m.kappa * m.b(t) * v * kernel_convolution(field, x, t, conv_grid) ** 2
    return float(out) if np.ndim(out) == 0 else out


def moments_check(field: SolutionField, grid: GridSpec, times):
    """Rows ``(t, sigma_ee, sigma_grid, rel_diff)`` comparing grid mass with the EE mass."""
    rows = []
    for t, V in zip(times, field.evaluate_grid(grid, times)):
        s_ee = field.ee.sigma(t)
        s_grid = integrate(V, grid)
        rows.append((float(t), s_ee, s_grid, abs(s_grid - s_ee) / abs(s_ee)))
    return rows


def central_dip(field: SolutionField, t, half_width: float | None = None, points: int = 201) -> bool:
    """True when the origin is a strict local minimum of the ``x2 = 0`` section."""
    half_width = half_width or 10 * math.sqrt(field.D)
    x1 = np.linspace(-half_width, half_width, points)
    v = field.evaluate(np.stack([x1, np.zeros_like(x1)], -1), t)
    i = points // 2
    return bool(v[i] < v[i - 1] and v[i] < v[i + 1])


# -- ladder operators -------------------------------------------------------
@dataclass(frozen=True)
class _AxisFunction:
    """``p(x) exp(q x^2)`` on one axis."""

    p: Polynomial
    q: float

    def derivative(self) -> "_AxisFunction":
        return _AxisFunction(self.p.deriv() + Polynomial([0, 2 * self.q]) * self.p, self.q)

    def __call__(self, x):
        return self.p(x) * np.exp(self.q * x**2)


def _ladder(f: _AxisFunction, W, Z, beta, D, sign):
    """``sign/sqrt(2 beta D) (Z D d/dx - W x)`` applied to ``f``."""
    df = f.derivative()
    p = Z * D * df.p - W * Polynomial([0, 1]) * f.p
    return _AxisFunction(sign * p / math.sqrt(2 * beta * D), f.q)


@dataclass(frozen=True)
class LadderReport:
    t: float
    axis: int
    nullification: float
    raising_deviation: float
    commutator_deviation: float


def apply_ladder_check(field: SolutionField, t, grid: GridSpec) -> list[LadderReport]:
    """Apply the lowering and raising operators of each axis to the zeroth mode.

    The lowering operator is ``-(Z(-) D d - W(-) x)/sqrt(2 beta D)`` and the
    raising operator ``+(Z(+) D d - W(+) x)/sqrt(2 beta D)``.  Results are
    relative L2 norms on ``grid``: lowering output against ``v_0``, raising
    output against the closed-form first mode, and the commutator
    ``[a(-), a(+)] v_0`` against ``v_0``.
    """
    if field.expansion.n_max != 0:
        raise ValueError("the ladder check needs the zeroth mode alone")
    D = field.D
    c, s, q, amp = field._axis_data(t)
    g = field.traj.at(float(t))
    beta = field.traj.params.betas
    k0 = field.expansion.coeffs[0, 0]
    f = [_AxisFunction(Polynomial([1.0]), q[i]) for i in range(2)]
    X1, X2 = grid.mesh()

    def norm(u):
        return math.sqrt(integrate(u**2, grid))

    def assemble(h1, h2):
        return amp * k0 * h1(X1) * h2(X2)

    v0 = assemble(f[0], f[1])
    first = mode_field((1, 0), field.ee, field.traj, field.expansion.N0)
    reports = []
    for i in range(2):
        lower = lambda h: _ladder(h, g.Wm[i], g.Zm[i], beta[i], D, -1.0)  # noqa: E731
        raise_ = lambda h: _ladder(h, g.Wp[i], g.Zp[i], beta[i], D, +1.0)  # noqa: E731
        other = f[1 - i]
        order = (lambda h: (h, other)) if i == 0 else (lambda h: (other, h))
        low = assemble(*order(lower(f[i])))
        up = assemble(*order(raise_(f[i])))
        comm = assemble(*order(lower(raise_(f[i])))) - assemble(*order(raise_(lower(f[i]))))
        if i == 0:
            ref = first.evaluate_grid(grid, [t])[0] * k0
        else:
            ref = mode_field((0, 1), field.ee, field.traj, field.expansion.N0).evaluate_grid(grid, [t])[0] * k0
        reports.append(LadderReport(float(t), i + 1, norm(low) / norm(v0), norm(up - ref) / norm(ref),
                                    norm(comm - v0) / norm(v0)))
    return reports
