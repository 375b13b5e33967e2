"""Exception hierarchy shared by all sdlift modules."""


class SdliftError(Exception):
    """Base class for every error raised by sdlift.

    Multi-period runs set ``period`` to the index of the sampling period in
    which the error surfaced.
    """

    period = None

    def __str__(self):
        msg = super().__str__()
        return msg if self.period is None else f"period {self.period}: {msg}"


class ParseError(SdliftError, ValueError):
    """Malformed expression text.

    Attributes
    ----------
    offset : int
        Byte offset into the UTF-8 encoded source where parsing failed.
    expected : frozenset of str
        Tokens that would have been accepted at ``offset``.
    """

    def __init__(self, message, offset=0, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at byte {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class UnknownFunctionError(ParseError):
    """A call names a function outside the supported set."""


class DomainError(SdliftError, ArithmeticError):
    """An expression was evaluated outside its mathematical domain.

    ``step`` is filled in by the integrators with the index of the fast
    subinterval on which the failure happened.
    """

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (subinterval {step})"
        super().__init__(message)


class OutOfBoundsError(SdliftError, IndexError):
    """A variable index exceeds the length of the supplied vector."""


class ShapeError(SdliftError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class DimensionMismatch(ShapeError):
    """Plant, controller and reference dimensions do not line up."""


class ContinuityError(SdliftError, ValueError):
    """Adjacent lifted segments disagree at their shared node."""

    def __init__(self, segment, gap):
        self.segment = segment
        self.gap = gap
        super().__init__(
            f"segments {segment} and {segment + 1} differ by {gap:.3e} at the shared node"
        )


class SignalRangeError(SdliftError, ValueError):
    """Point evaluation requested outside the sampling interval."""


class NonFiniteStateError(SdliftError, FloatingPointError):
    """The integrated state left the finite floating-point range."""

    def __init__(self, step, state=None):
        self.step = step
        self.state = state
        super().__init__(f"state became non-finite on subinterval {step}")


class NonFiniteError(SdliftError, FloatingPointError):
    """A matrix computation overflowed."""


class BadEigenPair(SdliftError, ValueError):
    """A supplied eigenpair does not satisfy its eigen-relation."""


class ConfigError(SdliftError, ValueError):
    """A JSON configuration is structurally invalid."""
