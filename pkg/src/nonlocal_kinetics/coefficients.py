"""Time-dependent equation coefficients, the nonlocal kernel and quadratures.

Two coefficient families are supported:

* :class:`ExponentialRelaxation` -- ``a(t) = A1 exp(-t/tau_a)``,
  ``D_a(t) = d1 exp(-t/tau_d)``, ``b(t) = B2 + (B1 - B2) exp(-t/tau_b)``,
  with closed-form integrals.
* :class:`TabulatedRates` -- sampled ``(t, a, b, D_a)`` rows interpolated by
  monotone cubic (PCHIP) pieces; integrals are exact antiderivatives of the
  interpolant.

Every integral can also be taken by adaptive Gauss-Kronrod quadrature
(``method="quad"``), which serves as an independent check of the closed forms.

Both are wrapped in :class:`CoefficientModel` together with the kernel width
``mu``, the nonlinearity strength ``kappa`` and the small diffusion parameter
``D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import DomainError

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(~np.isfinite(t)):
        raise DomainError(f"time must be finite and non-negative, got {t}")
    return t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ExponentialRelaxation:
    """Relaxation-type coefficients with exponential decay toward constants."""

    A1: float = 1.0
    tau_a: float = 1.0
    d1: float = 0.5
    tau_d: float = 1.0
    B1: float = 0.2
    B2: float = 0.4
    tau_b: float = 1.0

    kind = "exponential"

    def __post_init__(self):
        for name in ("tau_a", "tau_d", "tau_b"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.d1 < 0:
            raise DomainError("d1 must be non-negative")

    def a(self, t):
        return self.A1 * np.exp(-_check_time(t) / self.tau_a)

    def b(self, t):
        return self.B2 + (self.B1 - self.B2) * np.exp(-_check_time(t) / self.tau_b)

    def diffusion(self, t):
        return self.d1 * np.exp(-_check_time(t) / self.tau_d)

    def int_a(self, t):
        """Antiderivative of ``a`` vanishing at zero."""
        return self.A1 * self.tau_a * -np.expm1(-_check_time(t) / self.tau_a)

    def int_diffusion(self, t):
        return self.d1 * self.tau_d * -np.expm1(-_check_time(t) / self.tau_d)

    def int_b(self, t):
        t = _check_time(t)
        return self.B2 * t + (self.B1 - self.B2) * self.tau_b * -np.expm1(-t / self.tau_b)

    @property
    def t_max(self) -> float:
        return np.inf

    @property
    def knots(self) -> np.ndarray:
        return np.empty(0)


@dataclass(frozen=True, eq=False)
class TabulatedRates:
    """Sampled coefficients on a strictly increasing time table.

    Extrapolation beyond the last row raises :class:`DomainError`.
    """

    t: np.ndarray
    a_values: np.ndarray
    b_values: np.ndarray
    diffusion_values: np.ndarray
    _interp: dict = field(default=None, init=False, repr=False, compare=False)

    kind = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        cols = [np.asarray(v, dtype=float) for v in (self.a_values, self.b_values, self.diffusion_values)]
        if t.ndim != 1 or len(t) < 2 or any(c.shape != t.shape for c in cols):
            raise DomainError("tabulated coefficients need matching 1D columns with >= 2 rows")
        if t[0] != 0.0:
            raise DomainError("the coefficient table must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise DomainError("table times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "a_values", cols[0])
        object.__setattr__(self, "b_values", cols[1])
        object.__setattr__(self, "diffusion_values", cols[2])
        interp = {name: PchipInterpolator(t, c, extrapolate=False)
                  for name, c in zip(("a", "b", "diffusion"), cols)}
        for name in ("a", "b", "diffusion"):
            interp["int_" + name] = interp[name].antiderivative()
        object.__setattr__(self, "_interp", interp)

    @classmethod
    def from_callables(cls, t, a, b, diffusion):
        t = np.asarray(t, dtype=float)
        return cls(t, a(t), b(t), diffusion(t))

    def _eval(self, name, t):
        t = _check_time(t)
        if np.any(t > self.t[-1]):
            raise DomainError(f"t exceeds the coefficient table (t_max = {self.t[-1]})")
        return _out(self._interp[name](t))

    def a(self, t):
        return self._eval("a", t)

    def b(self, t):
        return self._eval("b", t)

    def diffusion(self, t):
        return self._eval("diffusion", t)

    def int_a(self, t):
        """Exact integral of the interpolant (its antiderivative)."""
        return self._eval("int_a", t)

    def int_diffusion(self, t):
        return self._eval("int_diffusion", t)

    def int_b(self, t):
        return self._eval("int_b", t)

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    @property
    def knots(self) -> np.ndarray:
        return self.t


def adaptive_integral(f, lo: float, hi: float, breakpoints=()) -> float:
    """Adaptive Gauss-Kronrod quadrature of a scalar function on ``[lo, hi]``."""
    if hi == lo:
        return 0.0
    pts = [p for p in np.asarray(breakpoints, dtype=float) if lo < p < hi]
    val, _ = integrate.quad(f, lo, hi, points=pts or None, epsabs=QUAD_EPSABS,
                            epsrel=QUAD_EPSREL, limit=max(200, 4 * len(pts)))
    return val


@dataclass(frozen=True)
class CoefficientModel:
    """Coefficient functions plus the scalar parameters of the kinetic equation."""

    rates: ExponentialRelaxation | TabulatedRates = field(default_factory=ExponentialRelaxation)
    mu: float = 0.5
    kappa: float = 1.0
    D: float = 0.01

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not self.D > 0:
            raise DomainError(f"D must be positive, got {self.D}")
        if self.kappa < 0:
            raise DomainError(f"kappa must be non-negative, got {self.kappa}")

    @property
    def kind(self) -> str:
        return self.rates.kind

    def a(self, t):
        return self.rates.a(t)

    def b(self, t):
        return self.rates.b(t)

    def diffusion(self, t):
        return self.rates.diffusion(t)


def eval_a(model: CoefficientModel, t):
    return model.a(t)


def eval_b(model: CoefficientModel, t):
    return model.b(t)


def eval_diffusion(model: CoefficientModel, t):
    return model.diffusion(t)


def kernel_p(r1, r2, mu: float):
    """Gaussian nonlocality kernel ``exp(-(|r1|^2 + |r2|^2) / (2 mu^2))``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    return _out(np.exp(-(np.sum(r1**2, axis=-1) + np.sum(r2**2, axis=-1)) / (2 * mu**2)))


def _integral_a(model: CoefficientModel, t, method: str):
    if method == "quad":
        t = _check_time(t)
        flat = np.atleast_1d(t).ravel()
        out = np.array([adaptive_integral(lambda s: float(model.a(s)), 0.0, ti, model.rates.knots)
                        for ti in flat])
        return out.reshape(np.shape(t))
    if method not in ("auto", "closed"):
        raise ValueError(f"unknown method {method!r}")
    return model.rates.int_a(t)


def varpi(model: CoefficientModel, t, tau, method: str = "auto"):
    """Growth propagator ``exp(-2 * int_tau^t a)``.

    ``method`` selects the analytic antiderivative (``"closed"``/``"auto"``)
    or adaptive Gauss-Kronrod quadrature (``"quad"``).
    """
    _check_time(t)
    _check_time(tau)
    return _out(np.exp(-2.0 * (_integral_a(model, t, method) - _integral_a(model, tau, method))))


def int_diffusion(model: CoefficientModel, t, method: str = "auto"):
    """``int_0^t D_a(s) ds``."""
    if method == "quad":
        t = _check_time(t)
        flat = np.atleast_1d(t).ravel()
        out = np.array([adaptive_integral(lambda s: float(model.diffusion(s)), 0.0, ti,
                                          model.rates.knots) for ti in flat])
        return _out(out.reshape(np.shape(t)))
    if method not in ("auto", "closed"):
        raise ValueError(f"unknown method {method!r}")
    return _out(model.rates.int_diffusion(t))
