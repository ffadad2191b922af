"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class DomainError(ValueError):
    """A closed-form expression would be evaluated at a singular point."""


class GridMismatchError(ValueError):
    """Two fields living on different collocation grids were combined."""


class NumericalError(RuntimeError):
    """A linear solve or iteration broke down."""


class SchemeBlowupError(RuntimeError):
    """The time integrator produced non-finite values.

    This is a failure of the discretisation, not the finite-time blow-up of
    the PDE solution itself.
    """


class ConfigError(ValueError):
    """A run configuration could not be parsed or is inconsistent."""
