"""Exception types with stable error codes.

Every error raised on purpose by the library carries a ``code`` attribute so
callers (and the CLI) can dispatch on it without parsing messages.
"""

from __future__ import annotations


class NonlocalError(Exception):
    """Base class for all library errors."""

    code = "NONLOCAL_ERROR"


class ConfigError(NonlocalError, ValueError):
    """A parameter or config record violates a documented invariant.

    Parameters
    ----------
    field : str
        Name of the offending field.
    invariant : str
        Human readable statement of the invariant that failed.
    """

    code = "CONFIG_ERROR"

    def __init__(self, field: str, invariant: str, value=None):
        self.field = field
        self.invariant = invariant
        self.value = value
        msg = f"invalid {field}={value!r}: requires {invariant}"
        super().__init__(msg)


class SingularityUnresolved(NonlocalError):
    """Pointwise operator undefined at a critical point in the singular range."""

    code = "SINGULARITY_UNRESOLVED"


class DecayUncertified(NonlocalError):
    """Field lacks a certificate of membership in the decay space."""

    code = "DECAY_UNCERTIFIED"


class SupportViolation(NonlocalError):
    """Test function support is not strictly inside the admissible box."""

    code = "SUPPORT_VIOLATION"


class SearchRadiusExceeded(NonlocalError):
    """An envelope minimizer landed on the boundary of the search ball."""

    code = "SEARCH_RADIUS_EXCEEDED"


class DomainViolation(NonlocalError):
    """A ball used for a local infimum leaves the declared domain."""

    code = "DOMAIN_VIOLATION"


class CertificationFailed(NonlocalError):
    """C2-beta certification quotient exceeded its cap."""

    code = "CERTIFICATION_FAILED"


class TouchViolation(NonlocalError):
    """A test function does not touch the target from below."""

    code = "TOUCH_VIOLATION"


class MissingCertificate(NonlocalError):
    """Singular-range touch at a critical point without a C2-beta certificate."""

    code = "MISSING_CERTIFICATE"
