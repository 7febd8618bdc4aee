"""Exception hierarchy shared by the library and the CLI."""
from typing import Optional


class GeodesicMCError(Exception):
    """Base class for every error raised on purpose by this package."""


class InvalidInput(GeodesicMCError, ValueError):
    """An argument violates a documented precondition (shape, symmetry, manifold membership)."""


class NumericalFailure(GeodesicMCError):
    """A numerical routine failed to produce a trustworthy result."""


class NotPSD(NumericalFailure):
    """A matrix expected to be positive semi-definite has a retained negative eigenvalue."""


class DriftTooLarge(NumericalFailure):
    """A point left the manifold by more than the allowed constraint violation."""

    def __init__(self, violation: float, limit: float):
        super().__init__(f"constraint violation {violation:.3e} exceeds limit {limit:.1e}")
        self.violation = violation
        self.limit = limit


class InsufficientSamples(InvalidInput):
    """A statistic was requested from too few samples."""


class ConfigError(InvalidInput):
    """Malformed run configuration.

    `line`/`column` anchor the error in the config file; `key` is the dotted path of the
    offending entry for schema errors (e.g. "sampler.step").
    """

    def __init__(self, message: str, source: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None, key: Optional[str] = None):
        self.message = message
        self.key = key
        self.source = source
        self.line = line
        self.column = column
        anchor = source or "<config>"
        if line is not None:
            anchor = f"{anchor}:{line}"
            if column is not None:
                anchor = f"{anchor}:{column}"
        super().__init__(f"{anchor}: {message}")
