"""Exception hierarchy shared by all modules."""


class OrbcountError(Exception):
    """Base class for every error raised by the package."""


class NumericDomainError(OrbcountError, ArithmeticError):
    """Non-finite entries or a failed factorisation."""


class ConfigurationError(OrbcountError, ValueError):
    """Signature mismatch, bad determinant or an out-of-range setting."""


class NotProximalError(OrbcountError):
    """Eigenvalue moduli are not separated enough to define an attracting flag."""


class TransversalityError(OrbcountError):
    """A pair of flags is not in general position."""


class InsufficientDataError(OrbcountError):
    """Too few populated bins (or records) to fit an exponent."""


class ConvergenceError(OrbcountError):
    """An iterative solver did not reach its tolerance."""


class UnsupportedError(OrbcountError):
    """Operation not available in the current enumeration mode."""


class ResourceError(OrbcountError, MemoryError):
    """A configured capacity limit was exceeded."""
