"""Exception hierarchy shared by all modules."""


class OrliczError(Exception):
    """Base class for every error raised by orliczlab."""


class DomainError(OrliczError, ValueError):
    """Argument outside the mathematical domain (negative t, non-finite data)."""


class RangeError(OrliczError, ValueError):
    """Argument outside the validated evaluation range of a table or grid."""


class DegenerateInputError(OrliczError, ValueError):
    pass


class NotDelta2Error(OrliczError):
    """Growth-ratio samples suggest the function violates the Delta_2 condition."""

    def __init__(self, message, ratio_tail=None):
        super().__init__(message)
        self.ratio_tail = ratio_tail


class UnsupportedRegimeError(OrliczError, ValueError):
    """Requested construction needs p+ < n (or another regime restriction)."""


class InvalidProfileError(OrliczError, ValueError):
    pass


class UnderResolvedError(OrliczError, ValueError):
    """A bubble scale is below the grid resolvability floor (4 cells)."""


class ConfigError(OrliczError, ValueError):
    pass


class GeometryError(OrliczError):
    """No mountain-pass geometry could be certified on the sampled radii."""
