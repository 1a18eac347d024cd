"""Exception types raised across the toolkit."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class CertificateError(ArithmeticError):
    """A numerical certificate (growth or Lipschitz constant) could not be produced."""


class SchemeMismatchError(ValueError):
    """A discretization scheme was requested for a model it does not apply to."""


class NumericalOverflowError(ArithmeticError):
    """A simulated state or a bound left the representable range."""


class ShapeError(ValueError):
    """Path ensembles disagree on grid or path count."""


class NonConvergenceError(RuntimeError):
    """Picard iteration stopped without contracting."""


class ExitTimeoutError(RuntimeError):
    """Some exit-time paths never left the domain within the step cap."""

    def __init__(self, message, n_unexited):
        super().__init__(message)
        self.n_unexited = n_unexited


class ConfigError(ValueError):
    """Invalid experiment configuration."""
