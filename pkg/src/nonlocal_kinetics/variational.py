"""Variational system generating the germ, the Riccati curvature and the phase.

For each axis the pair ``(W, Z)`` solves the linear system

    dZ/dt = -2 D_a(t) W,     dW/dt = 2 b~(t) Z,     b~ = kappa D b sigma^2 / mu^2,

from ``W(+)(0) = beta``, ``W(-)(0) = -beta`` and ``Z(+-)(0) = 1``.  Both
axes share one system, so a single 2x2 RK4 propagator per step advances all
four solutions at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .ee_system import EESolution
from .errors import DomainError, GermDegeneracyError, IntegrationBlowupError

# column order of the state matrix
COLUMNS = ("W1p", "Z1p", "W1m", "Z1m", "W2p", "Z2p", "W2m", "Z2m")
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class GermParams:
    beta1: float
    beta2: float

    def __post_init__(self):
        if not (self.beta1 > 0 and self.beta2 > 0):
            raise ValueError(f"germ parameters must be positive, got ({self.beta1}, {self.beta2})")

    @classmethod
    def isotropic(cls, beta: float) -> "GermParams":
        return cls(beta, beta)

    @property
    def betas(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2])


@dataclass(frozen=True)
class GermEvent:
    time: float
    axis: int
    name: str  # "Z+", "Z-" or "W-"


@dataclass(frozen=True)
class GermState:
    """Germ quantities at one time; each array is indexed by axis."""

    Wp: np.ndarray
    Zp: np.ndarray
    Wm: np.ndarray
    Zm: np.ndarray

    @property
    def Q(self) -> np.ndarray:
        return self.Wm / self.Zm

    @property
    def ratio(self) -> np.ndarray:
        """``Z(+)/Z(-)``; its half-integer powers weight the modes."""
        return self.Zp / self.Zm


def b_tilde(ee: EESolution, t):
    m = ee.model
    return m.kappa / m.mu**2 * m.D * m.b(t) * np.asarray(ee.sigma(t)) ** 2


def _rhs_matrices(dif, bt):
    """Stack of ``[[0, 2 b~], [-2 D_a, 0]]`` acting on ``(W, Z)``."""
    A = np.zeros(np.shape(dif) + (2, 2))
    A[..., 0, 1] = 2.0 * bt
    A[..., 1, 0] = -2.0 * dif
    return A


def _rk4_propagators(A0, Ah, A1, h):
    eye = np.eye(2)
    K1 = A0
    K2 = Ah @ (eye + 0.5 * h * K1)
    K3 = Ah @ (eye + 0.5 * h * K2)
    K4 = A1 @ (eye + h * K3)
    return eye + h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)


def _march(ee, dif_fn, T, n, Y0):
    t = np.linspace(0.0, T, n + 1)
    h = T / n
    half = t[:-1] + 0.5 * h
    A_nodes = _rhs_matrices(dif_fn(t), b_tilde(ee, t))
    A_half = _rhs_matrices(dif_fn(half), b_tilde(ee, half))
    P = _rk4_propagators(A_nodes[:-1], A_half, A_nodes[1:], h)
    Y = np.empty((n + 1,) + Y0.shape)
    Y[0] = Y0
    for k in range(n):
        Y[k + 1] = P[k] @ Y[k]
    if not np.all(np.isfinite(Y)):
        raise IntegrationBlowupError("non-finite germ state")
    return t, Y, A_nodes


@dataclass(frozen=True)
class VariationalTrajectory:
    """Dense RK4 solution of the variational system for both axes and branches."""

    params: GermParams
    t: np.ndarray
    states: np.ndarray  # (n+1, 8) in COLUMNS order
    derivs: np.ndarray
    phi_nodes: np.ndarray
    dt: float
    horizon: float
    error_estimate: float
    events: tuple = ()
    validity_end: float = np.inf
    _spline: object = field(default=None, repr=False, compare=False)
    _phi_spline: object = field(default=None, repr=False, compare=False)

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise DomainError(f"t outside the germ interval [0, {self.horizon}]")
        return t

    def values(self, t) -> np.ndarray:
        return self._spline(self._check(t))

    def at(self, t) -> GermState:
        v = self.values(t)
        return GermState(Wp=v[..., [0, 4]], Zp=v[..., [1, 5]], Wm=v[..., [2, 6]], Zm=v[..., [3, 7]])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, COLUMNS.index(name)]

    def phi(self, t):
        out = self._phi_spline(self._check(t))
        return float(out) if np.ndim(out) == 0 else out

    def require_valid(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.validity_end):
            raise GermDegeneracyError(
                f"germ degenerates at t = {self.validity_end:.6g}; evaluate at t < {self.validity_end:.6g}",
                time=self.validity_end)


def _find_events(t, Y, spline):
    events = []
    for idx, name in ((1, "Z+"), (3, "Z-"), (2, "W-")):
        for axis, off in ((1, 0), (2, 4)):
            col = Y[:, idx + off]
            flips = np.nonzero(np.sign(col[:-1]) * np.sign(col[1:]) <= 0)[0]
            for k in flips:
                if col[k] == 0:
                    root = t[k]
                elif col[k + 1] == 0:
                    root = t[k + 1]
                else:
                    root = brentq(lambda s: spline(s)[idx + off], t[k], t[k + 1], xtol=1e-14)
                if k > 0 or col[0] != 0:
                    events.append(GermEvent(float(root), axis, name))
    # repeated roots on node boundaries
    uniq = {(round(e.time, 12), e.axis, e.name): e for e in events}
    return tuple(sorted(uniq.values(), key=lambda e: e.time))


def integrate_germ(ee: EESolution, params: GermParams, T: float, dt: float = 1e-3,
                   shadow: bool = True) -> VariationalTrajectory:
    """Fixed-step RK4 solution of the variational system on ``[0, T]``.

    Parameters
    ----------
    ee : EESolution
        Supplies ``sigma(t)`` for the coefficient ``b~``.
    params : GermParams
    T, dt : float
        Horizon and step; the step is shrunk so that ``T/dt`` is an integer.
    shadow : bool
        Repeat the run at ``dt/2`` and report the node-wise disagreement as
        ``error_estimate``.
    """
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    if T > ee.horizon * (1 + 1e-12):
        raise DomainError(f"germ horizon {T} exceeds the EE horizon {ee.horizon}")
    dif_fn = ee.model.diffusion
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    b1, b2 = params.beta1, params.beta2
    Y0 = np.array([[b1, -b1, b2, -b2], [1.0, 1.0, 1.0, 1.0]])
    t, Y, A = _march(ee, dif_fn, T, n, Y0)
    dY = A @ Y
    err = np.nan
    if shadow:
        _, Yh, _ = _march(ee, dif_fn, T, 2 * n, Y0)
        err = float(np.max(np.abs(Yh[::2] - Y) / np.maximum(1.0, np.abs(Y))))

    # (n+1, 2, 4) -> (n+1, 8) in COLUMNS order: (W,Z) pairs for 1+, 1-, 2+, 2-
    states = Y.transpose(0, 2, 1).reshape(n + 1, 8)
    derivs = dY.transpose(0, 2, 1).reshape(n + 1, 8)
    spline = CubicHermiteSpline(t, states, derivs, axis=0)

    # phase: int D_a (Q1 + Q2), composite Simpson with Hermite midpoints
    dif = dif_fn(t)
    Zm = states[:, [3, 7]]
    if np.any(Zm <= 0):
        k = int(np.argmax(np.any(Zm <= 0, axis=1)))
        t_bad = t[k]
    else:
        t_bad = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = dif * (states[:, 2] / states[:, 3] + states[:, 6] / states[:, 7])
        mid_t = t[:-1] + 0.5 * (t[1] - t[0])
        mid = spline(mid_t)
        rate_mid = dif_fn(mid_t) * (mid[:, 2] / mid[:, 3] + mid[:, 6] / mid[:, 7])
    h = t[1] - t[0]
    phi = np.concatenate([[0.0], np.cumsum(h / 6.0 * (rate[:-1] + 4 * rate_mid + rate[1:]))])
    phi_spline = CubicHermiteSpline(t[: k + 1] if np.isfinite(t_bad) else t,
                                    phi[: k + 1] if np.isfinite(t_bad) else phi,
                                    rate[: k + 1] if np.isfinite(t_bad) else rate)

    events = _find_events(t, states, spline)
    hard = [e.time for e in events if e.name in ("Z-", "W-")]
    validity = min(hard) if hard else float(T)
    return VariationalTrajectory(params, t, states, derivs, phi, h, float(T), err, events,
                                 validity, spline, phi_spline)


def skew_product(traj: VariationalTrajectory, axis: int, t):
    """``Z(-) W(+) - Z(+) W(-)`` on one axis; equals ``2 beta`` for exact dynamics."""
    g = traj.at(t)
    i = axis - 1
    return g.Zm[..., i] * g.Wp[..., i] - g.Zp[..., i] * g.Wm[..., i]


def skew_deviation(traj: VariationalTrajectory) -> np.ndarray:
    """Max nodal deviation of the skew product from ``2 beta`` per axis."""
    s = traj.states
    out = []
    for axis, beta in ((0, traj.params.beta1), (1, traj.params.beta2)):
        o = 4 * axis
        sk = s[:, 3 + o] * s[:, 0 + o] - s[:, 1 + o] * s[:, 2 + o]
        out.append(np.max(np.abs(sk - 2 * beta)))
    return np.array(out)


def riccati_Q(traj: VariationalTrajectory, axis: int, t):
    """Curvature ``Q_i = W_i(-) / Z_i(-)`` of the Gaussian mode."""
    g = traj.at(t)
    i = axis - 1
    zm = g.Zm[..., i]
    if np.any(np.abs(zm) < DEGENERACY_TOL):
        raise GermDegeneracyError(f"Z{axis}(-) vanishes at t = {t}", time=float(np.min(t)))
    out = g.Wm[..., i] / zm
    return float(out) if np.ndim(out) == 0 else out


def phase_phi(traj: VariationalTrajectory, t):
    """``phi(t) = int_0^t D_a (Q_1 + Q_2)``."""
    traj.require_valid(t)
    return traj.phi(t)
