"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """Inconsistent or incomplete configuration (schedules, experiments)."""


class NumericalError(RuntimeError):
    """A computation lost the accuracy it needs to be trustworthy."""


class EigensolverError(NumericalError):
    """The phase solver could not certify the full set of eigenvalues."""
