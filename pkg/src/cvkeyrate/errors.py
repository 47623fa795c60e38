"""Exception types shared across the package."""


class KeyRateError(Exception):
    """Base class for all cvkeyrate errors."""


class DomainError(KeyRateError, ValueError):
    """An argument is outside the domain an operation is defined on."""


class NonphysicalStateError(KeyRateError):
    """Covariance-matrix quantities violate physicality beyond float noise.

    Raised when a symplectic-eigenvalue discriminant is significantly
    negative, which signals inconsistent channel/source parameters.
    """


class NoPositiveRateError(KeyRateError):
    """A search for a zero-rate distance was started from a dead channel."""


class EstimationError(KeyRateError):
    """Parameter estimation failed (degenerate data or nonpositive T-hat)."""


class EvaluationError(KeyRateError):
    """An integrand returned a non-finite value inside the support."""


class ConfigError(KeyRateError):
    """A run configuration file is missing, malformed, or inconsistent."""
