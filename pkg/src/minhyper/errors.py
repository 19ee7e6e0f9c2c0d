"""Exception hierarchy shared by every module."""

from __future__ import annotations


class MinHyperError(Exception):
    """Base class for all errors raised by this package."""


class NumericalError(MinHyperError):
    """A computation could not be carried out to the required accuracy."""


class DegenerateFrame(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DegeneratePencil(NumericalError):
    """Raised by frame-dependent operations when principal curvatures collide."""


class FrameAlignmentFailure(NumericalError):
    pass


class DomainEscape(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class OutOfInterval(NumericalError):
    pass


class PoleSingularity(NumericalError):
    pass


class NotOnSphere(NumericalError):
    pass


class ParameterError(MinHyperError):
    """Invalid construction parameters (user input, not numerics)."""


class BadBasis(ParameterError):
    pass


class EmptyInterval(ParameterError):
    pass


class ExprError(MinHyperError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class LexError(ExprError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.expected = expected
        super().__init__(message, offset)


class UnknownFunction(ParseError):
    pass


class UnboundName(ExprError):
    def __init__(self, name: str, offset: int | None = None):
        self.name = name
        super().__init__(f"unbound name {name!r}", offset)


class EvalError(ExprError):
    """Domain error during evaluation; ``offset`` is the failing operator or call, when known."""

    def __init__(self, reason: str, offset: int | None = None):
        self.reason = reason
        super().__init__(reason, offset)


class ConfigError(MinHyperError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")
