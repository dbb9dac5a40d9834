"""Exception hierarchy shared by the solver modules and the CLI."""


class DomainError(ValueError):
    """An argument lies outside the domain of a coefficient or kernel."""


class ConfigError(ValueError):
    """Invalid or unknown run-configuration entry."""


class NumericalValidityError(RuntimeError):
    """Base class for failures that make the asymptotic construction invalid."""


class DegenerateMassError(NumericalValidityError):
    """The total mass of the initial data vanishes."""


class AnisotropyError(NumericalValidityError):
    """Second-moment matrix is not axis aligned (or the centre is displaced)."""


class ResolutionError(NumericalValidityError):
    """A quadrature grid does not resolve the functions it integrates."""


class GermDegeneracyError(NumericalValidityError):
    """A germ quantity vanishes where the construction needs it nonzero."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SingularSolutionError(NumericalValidityError):
    """The moment solution blows up (z(t) <= 0)."""


class IntegrationBlowupError(NumericalValidityError):
    """The fixed-step integrator produced a non-finite state."""


class ModelWarning(UserWarning):
    """Modelling assumption violated, evaluation continues."""
