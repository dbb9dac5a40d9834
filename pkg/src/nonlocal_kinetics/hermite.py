"""Hermite-Gauss mode basis, expansion coefficients and mode moments.

The basis at ``t = 0`` is

    psi_n(x) = H_{n1}(x1 sqrt(beta1/D)) H_{n2}(x2 sqrt(beta2/D)) / D
               * exp(-(beta1 x1^2 + beta2 x2^2) / (2 D)),

orthogonal with squared norms ``2^{|n|} n! pi / (D sqrt(beta1 beta2))``.

Time-dependent modes carry the factor ``(Z(+)/Z(-))^{n/2} H_n(xi)`` with
``xi = x sqrt(beta / (D Z(-) Z(+)))``.  Writing ``s = Z(+)/Z(-)`` and
``y = x sqrt(beta/D) / Z(-)`` this product equals the scaled Hermite
polynomial ``P_n(y; s) = s^{n/2} H_n(y / sqrt(s))``, which obeys

    P_{n+1} = 2 y P_n - 2 n s P_{n-1},

and is a polynomial in ``s``.  Evaluating through ``P_n`` removes the
apparent singularity where ``Z(+)`` crosses zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .ee_system import EESolution, MomentState
from .errors import ConfigError, DegenerateMassError, GermDegeneracyError, ResolutionError
from .grid import GridSpec, trapezoid_weights
from .variational import GermParams, VariationalTrajectory

K_MAX = 60
POINTS_PER_OSCILLATION = 8
REGULARIZE_TOL = 1e-6
# scale lengths beyond the outermost turning point that the grid must cover
COVERAGE_MARGIN = 4.0


class ModeIndex(NamedTuple):
    n1: int
    n2: int

    @property
    def order(self) -> int:
        return self.n1 + self.n2

    @property
    def factorial(self) -> int:
        return math.factorial(self.n1) * math.factorial(self.n2)


def _as_index(n) -> ModeIndex:
    n = ModeIndex(*(int(v) for v in n))
    if n.n1 < 0 or n.n2 < 0:
        raise ValueError(f"mode indices must be non-negative, got {tuple(n)}")
    return n


def hermite_all(k: int, xi, k_max: int = K_MAX) -> np.ndarray:
    """Physicists' Hermite polynomials ``H_0 .. H_k`` stacked on axis 0."""
    return scaled_hermite_all(k, xi, 1.0, k_max)


def scaled_hermite_all(k: int, y, s, k_max: int = K_MAX) -> np.ndarray:
    """``P_j(y; s) = s^{j/2} H_j(y / sqrt(s))`` for ``j = 0 .. k``.

    ``s`` may be zero or negative; the recurrence only uses integer powers.
    """
    if k > k_max:
        raise ConfigError(f"Hermite degree {k} exceeds the cap {k_max}")
    if k < 0:
        raise ValueError("degree must be non-negative")
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.empty((k + 1,) + np.broadcast(y, s).shape)
    out[0] = 1.0
    if k >= 1:
        out[1] = 2.0 * y
    for j in range(1, k):
        out[j + 1] = 2.0 * y * out[j] - 2.0 * j * s * out[j - 1]
    return out


def hermite_poly(k: int, xi, k_max: int = K_MAX):
    """``H_k(xi)`` by the upward three-term recurrence."""
    out = hermite_all(k, xi, k_max)[k]
    return float(out) if np.ndim(out) == 0 else out


def basis_norm(n, params: GermParams, D: float) -> float:
    n = _as_index(n)
    return 2.0**n.order * n.factorial * math.pi / (D * math.sqrt(params.beta1 * params.beta2))


def psi_n(n, x, params: GermParams, D: float):
    """Basis function ``psi_n`` at points ``x`` (last axis of length 2)."""
    n = _as_index(n)
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    h1 = hermite_poly(n.n1, x1 * math.sqrt(params.beta1 / D))
    h2 = hermite_poly(n.n2, x2 * math.sqrt(params.beta2 / D))
    out = h1 * h2 / D * np.exp(-(params.beta1 * x1**2 + params.beta2 * x2**2) / (2 * D))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HermiteExpansion:
    """Truncated coefficient table ``k[n1, n2]`` for ``n_i <= n_max``."""

    coeffs: np.ndarray
    params: GermParams
    D: float
    N0: float = 1.0
    source: str = "closed_form"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficient table must be square")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def tail(self) -> float:
        """Largest ``|k_n|`` on the outer shell ``max(n1, n2) = n_max``."""
        c = np.abs(self.coeffs)
        return float(max(c[-1, :].max(), c[:, -1].max()))

    def __getitem__(self, n) -> float:
        n1, n2 = n
        if n1 > self.n_max or n2 > self.n_max:
            return 0.0
        return float(self.coeffs[n1, n2])

    def evaluate_initial(self, x):
        """``sum_n k_n psi_n(x)``."""
        x = np.asarray(x, dtype=float)
        y1 = x[..., 0] * math.sqrt(self.params.beta1 / self.D)
        y2 = x[..., 1] * math.sqrt(self.params.beta2 / self.D)
        H1 = hermite_all(self.n_max, y1)
        H2 = hermite_all(self.n_max, y2)
        series = np.einsum("ij,i...,j...->...", self.coeffs, H1, H2)
        return series / self.D * np.exp(-(y1**2 + y2**2) / 2)

    def scaled(self, factor: float) -> "HermiteExpansion":
        return HermiteExpansion(self.coeffs * factor, self.params, self.D, self.N0, self.source)


def _axis_basis(axis, n_max, beta, D):
    xi = axis * math.sqrt(beta / D)
    return hermite_all(n_max, xi) * np.exp(-0.5 * xi**2)


def check_resolution(grid: GridSpec, params: GermParams, D: float, n_max: int):
    """Raise :class:`ResolutionError` unless the grid resolves ``psi_{n_max}``."""
    for (lo, hi, _), h, beta, label in zip((grid.x1, grid.x2), grid.spacing,
                                           (params.beta1, params.beta2), ("x1", "x2")):
        scale = math.sqrt(D / beta)
        wavelength = 2 * math.pi / math.sqrt(2 * n_max + 1) * scale
        if h > wavelength / POINTS_PER_OSCILLATION:
            raise ResolutionError(
                f"{label}: spacing {h:.3g} exceeds 1/{POINTS_PER_OSCILLATION} of the mode-{n_max}"
                f" oscillation length {wavelength:.3g}")
        reach = (math.sqrt(2 * n_max + 1) + COVERAGE_MARGIN) * scale
        if lo > -reach or hi < reach:
            raise ResolutionError(f"{label}: grid [{lo}, {hi}] does not cover +-{reach:.3g}")


def project_ic(field, grid: GridSpec, params: GermParams, D: float, n_max: int,
               N0: float = 1.0) -> HermiteExpansion:
    """Expansion coefficients of a gridded field by orthogonal projection."""
    phi = np.asarray(field, dtype=float)
    if phi.shape != grid.shape:
        raise ValueError(f"field shape {phi.shape} does not match grid {grid.shape}")
    check_resolution(grid, params, D, n_max)
    ax1, ax2 = grid.axes()
    h1, h2 = grid.spacing
    B1 = _axis_basis(ax1, n_max, params.beta1, D) * trapezoid_weights(len(ax1), h1)
    B2 = _axis_basis(ax2, n_max, params.beta2, D) * trapezoid_weights(len(ax2), h2)
    mass = float(trapezoid_weights(len(ax1), h1) @ phi @ trapezoid_weights(len(ax2), h2))
    if abs(mass) < 1e-12 * phi.size:
        raise DegenerateMassError(f"initial mass vanishes (sigma = {mass:.3e})")
    inner = B1 @ phi @ B2.T / D
    n = np.arange(n_max + 1)
    norms = np.outer(2.0**n * _factorials(n), 2.0**n * _factorials(n)) * math.pi / (
        D * math.sqrt(params.beta1 * params.beta2))
    return HermiteExpansion(inner / norms, params, D, N0, source="quadrature")


def _factorials(n):
    return np.array([math.factorial(int(k)) for k in n], dtype=float)


# -- double-Gaussian initial data -------------------------------------------
def double_gaussian(x, N: float, gamma1: float, gamma2: float, eps: float, D: float):
    """``(N/D) [exp(-|x|^2/(2 gamma1 D)) - eps exp(-|x|^2/(2 gamma2 D))]``."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x**2, axis=-1)
    return N / D * (np.exp(-r2 / (2 * gamma1 * D)) - eps * np.exp(-r2 / (2 * gamma2 * D)))


def double_gaussian_moments(N, gamma1, gamma2, eps, D) -> MomentState:
    sigma = 2 * N * math.pi * (gamma1 - eps * gamma2)
    a = D * (gamma1**2 - eps * gamma2**2) / (gamma1 - eps * gamma2)
    return MomentState(sigma, np.zeros(2), np.diag([a, a]))


def gaussian_ic_coeffs(N, gamma1, gamma2, eps, beta, D=None, n=(0, 0)) -> float:
    """Closed-form coefficient of the double-Gaussian data with ``beta1 = beta2 = beta``.

    ``n`` is the actual mode index; odd entries give exactly zero.  ``D`` does
    not enter the result and is accepted for signature symmetry.
    """
    n = _as_index(n)
    if n.n1 % 2 or n.n2 % 2:
        return 0.0
    m1, m2 = n.n1 // 2, n.n2 // 2
    order = m1 + m2
    r1 = (beta * gamma1 - 1) / (1 + beta * gamma1)
    r2 = (beta * gamma2 - 1) / (1 + beta * gamma2)
    bracket = (2 * gamma1 / (1 + beta * gamma1) * r1**order
               - 2 * eps * gamma2 / (1 + beta * gamma2) * r2**order)
    return N * beta / (2.0 ** (2 * order) * math.factorial(m1) * math.factorial(m2)) * bracket


def gaussian_ic_expansion(N, gamma1, gamma2, eps, beta, D, n_max, N0=1.0) -> HermiteExpansion:
    table = np.array([[gaussian_ic_coeffs(N, gamma1, gamma2, eps, beta, D, (i, j))
                       for j in range(n_max + 1)] for i in range(n_max + 1)])
    return HermiteExpansion(table, GermParams(beta, beta), D, N0, source="closed_form")


def tail_rate(beta, gamma1, gamma2) -> float:
    """Geometric decay ratio of the coefficients; smaller converges faster."""
    return max(abs((beta * gamma1 - 1) / (1 + beta * gamma1)),
               abs((beta * gamma2 - 1) / (1 + beta * gamma2)))


def optimal_beta(gamma1: float, gamma2: float) -> float:
    if not (gamma1 > 0 and gamma2 > 0):
        raise ValueError("gamma1 and gamma2 must be positive")
    return 1.0 / math.sqrt(gamma1 * gamma2)


def minimize_tail(functional, bounds=(1e-3, 1e3)) -> float:
    """Minimise a positive tail functional of ``beta`` over ``log beta``.

    No optimality claim beyond a local bounded search is made.
    """
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    res = minimize_scalar(lambda u: functional(math.exp(u)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    return float(math.exp(res.x))


def numeric_optimal_beta(gamma1: float, gamma2: float) -> float:
    g = sorted((gamma1, gamma2))
    return minimize_tail(lambda b: tail_rate(b, gamma1, gamma2), (0.5 / g[1], 2.0 / g[0]))


# -- moments -----------------------------------------------------------------
def _even_weights(n_max):
    """``(2m)!/m!`` for ``2m <= n_max``: the mass of ``H_{2m}(xi) exp(-xi^2/2)`` over sqrt(pi)."""
    m = np.arange(n_max // 2 + 1)
    return np.array([math.factorial(2 * k) / math.factorial(k) for k in m], dtype=float)


def ic_moments_from_coeffs(exp: HermiteExpansion) -> MomentState:
    """Mass and second moments of ``sum k_n psi_n`` from its coefficients.

    Uses ``int psi_{2m} = 2 pi / sqrt(b1 b2) * (2m1)!(2m2)!/(m1! m2!)`` and
    ``int x_i^2 psi_{2m} = (D/beta_i)(1 + 4 m_i)`` times the same weight;
    odd modes contribute nothing.
    """
    p = exp.params
    w = _even_weights(exp.n_max)
    K = exp.coeffs[::2, ::2]
    W = np.outer(w, w)
    base = 2 * math.pi / math.sqrt(p.beta1 * p.beta2)
    sigma = base * float(np.sum(K * W))
    if sigma == 0 or abs(sigma) < 1e-300:
        raise DegenerateMassError("coefficient sums give zero mass")
    m = np.arange(len(w))
    a11 = base * exp.D / p.beta1 * float(np.sum(K * W * (1 + 4 * m)[:, None])) / sigma
    a22 = base * exp.D / p.beta2 * float(np.sum(K * W * (1 + 4 * m)[None, :])) / sigma
    return MomentState(sigma, np.zeros(2), np.diag([a11, a22]))


@dataclass(frozen=True)
class ModeConstants:
    c_squared: float
    d_bar: np.ndarray


def mode_constants(n, params: GermParams, D: float, N0: float = 1.0) -> ModeConstants:
    """Integration constants that make the even mode ``n`` a standalone solution."""
    n = _as_index(n)
    if n.n1 % 2 or n.n2 % 2:
        raise ValueError(f"mode constants exist for even indices only, got {tuple(n)}")
    m1, m2 = n.n1 // 2, n.n2 // 2
    c2 = (N0 / 2.0 ** (m1 + m2 - 1) * math.pi / math.sqrt(params.beta1 * params.beta2)
          * math.sqrt(math.factorial(2 * m1) * math.factorial(2 * m2))
          / (math.factorial(m1) * math.factorial(m2)))
    d_bar = np.array([(1 + 4 * m1) / (2 * params.beta1), (1 + 4 * m2) / (2 * params.beta2)])
    return ModeConstants(c2, d_bar)


def upsilon(n, traj: VariationalTrajectory, ee: EESolution, t, N0: float = 1.0):
    """Time factor of ``v_n`` without the half-integer germ powers.

    Returns ``(-1)^{|n|} N0 exp(S/D + phi) / sqrt(2^{|n|} n!)``; the factor
    ``(Z+/Z-)^{n/2}`` is carried by the scaled Hermite polynomials.
    """
    n = _as_index(n)
    return ((-1) ** n.order * N0 / math.sqrt(2.0**n.order * n.factorial)
            * np.exp(ee.action_S(t) / ee.model.D + traj.phi(t)))


def mode_moments(n, traj: VariationalTrajectory, ee: EESolution, t, N0: float = 1.0,
                 regularize: str = "auto"):
    """Mass and diagonal second moments of the mode ``v_n`` at time ``t``.

    Odd modes have zero mass.  Near a zero of ``Z(+)`` (or always, with
    ``regularize="always"``) the singular factors are eliminated with the
    skew-product identity ``Z(-) W(+) - Z(+) W(-) = 2 beta``.
    """
    n = _as_index(n)
    traj.require_valid(t)
    if n.n1 % 2 or n.n2 % 2:
        return 0.0, np.full(2, np.nan)
    m = np.array([n.n1 // 2, n.n2 // 2])
    g = traj.at(t)
    beta = traj.params.betas
    if np.any(g.Wm >= 0):
        raise GermDegeneracyError(f"W(-) not negative at t = {t}", time=float(t))
    reg = regularize == "always" or (regularize == "auto" and np.any(np.abs(g.Zp) < REGULARIZE_TOL))
    N = N0 / math.sqrt(2.0 ** (2 * m.sum()) * math.factorial(2 * m[0]) * math.factorial(2 * m[1]))
    growth = np.exp(ee.action_S(t) / ee.model.D + traj.phi(t))
    base = 2 * math.pi * math.sqrt((g.Zm[0] * g.Zm[1]) / (g.Wm[0] * g.Wm[1]))
    comb = np.prod([math.factorial(2 * k) / math.factorial(k) for k in m])
    if reg:
        power = np.prod((-g.Wp / g.Wm) ** m)
        alpha = -ee.model.D * g.Zm / g.Wm - 4 * ee.model.D * beta * m / (g.Wm * g.Wp)
    else:
        if np.any(g.Zp == 0):
            raise GermDegeneracyError(f"Z(+) vanishes at t = {t}", time=float(t))
        ratio = g.Zp / g.Zm
        power = np.prod(ratio**m * (-2 * beta / (g.Zp * g.Wm) - 1) ** m)
        alpha = -ee.model.D * g.Zm / g.Wm * (
            1 + 1 / (2 * beta / (g.Zp * g.Wm) + 1) * 4 * beta / (g.Wm * g.Zp) * m)
    sigma = N * growth * base * comb * power
    return float(sigma), alpha
