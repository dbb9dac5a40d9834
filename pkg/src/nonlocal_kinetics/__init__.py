"""Semiclassical (weak-diffusion) solutions of a 2D kinetic equation with a
nonlocal cubic nonlinearity, built from a moment system, a linear variational
system and a Hermite-Gauss superposition."""

from .coefficients import CoefficientModel, ExponentialRelaxation, TabulatedRates
from .ee_system import EESolution, MomentState, match_constants, moments_from_field
from .errors import (AnisotropyError, ConfigError, DegenerateMassError, DomainError,
                     GermDegeneracyError, ModelWarning, NumericalValidityError, ResolutionError,
                     SingularSolutionError)
from .estimator import HermiteProjector, KineticSuperposition
from .grid import GridSpec
from .hermite import HermiteExpansion, ModeIndex, gaussian_ic_expansion, optimal_beta, project_ic
from .solver import DoubleGaussian, SolutionField, build_solution, single_mode_solution
from .variational import GermParams, VariationalTrajectory, integrate_germ

__all__ = [
    "AnisotropyError", "CoefficientModel", "ConfigError", "DegenerateMassError", "DomainError",
    "DoubleGaussian", "EESolution", "ExponentialRelaxation", "GermDegeneracyError", "GermParams",
    "GridSpec", "HermiteExpansion", "HermiteProjector", "KineticSuperposition", "ModeIndex",
    "ModelWarning", "MomentState", "NumericalValidityError", "ResolutionError", "SingularSolutionError",
    "SolutionField", "TabulatedRates", "VariationalTrajectory", "build_solution",
    "gaussian_ic_expansion", "integrate_germ", "match_constants", "moments_from_field",
    "optimal_beta", "project_ic", "single_mode_solution",
]
