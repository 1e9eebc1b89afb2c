"""Exception and warning types raised across the package."""


class BPREError(Exception):
    """Base class for package errors."""


class DomainError(BPREError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateEnvironment(BPREError, ValueError):
    """An environment family has zero latent scale, so sigma would be 0."""


class DegenerateVariance(BPREError, ValueError):
    """The normalizer V_{m,n,rho} vanishes for the supplied parameters."""


class PrecisionError(BPREError, ArithmeticError):
    """A numerical routine did not reach its accuracy target."""


class InsufficientSamples(BPREError, ValueError):
    """Too few Monte Carlo samples for a diagnostic."""


class ConfigError(BPREError, ValueError):
    """A configuration file or key is malformed."""


class ValidityWarning(UserWarning):
    """Advisory: an asymptotic validity heuristic is exceeded."""
