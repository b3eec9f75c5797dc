"""Exception types raised by vnsplit."""


class VnSplitError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(VnSplitError, ValueError):
    pass


class EmptySpan(VnSplitError, ValueError):
    pass


class NotSelfAdjointSpace(VnSplitError, ValueError):
    pass


class NotCommutative(VnSplitError, ValueError):
    pass


class DegenerateSampling(VnSplitError, RuntimeError):
    pass


class RefinementStall(VnSplitError, RuntimeError):
    pass


class NoConnector(VnSplitError, RuntimeError):
    pass


class NotHomomorphism(VnSplitError, ValueError):
    pass


class NotIsometry(VnSplitError, ValueError):
    pass


class NotUnitary(VnSplitError, ValueError):
    pass


class NotBalanced(VnSplitError, ValueError):
    pass


class NotLean(VnSplitError, ValueError):
    pass


class NotFactor(VnSplitError, ValueError):
    pass


class NotNested(VnSplitError, ValueError):
    pass


class NotTracePreserving(VnSplitError, ValueError):
    pass


class NotCompletelyPositive(VnSplitError, ValueError):
    pass


class NotSameChannel(VnSplitError, ValueError):
    pass


class DimensionOrder(VnSplitError, ValueError):
    pass


class AlgebraMismatch(VnSplitError, ValueError):
    pass


class NotSemiCausal(VnSplitError, ValueError):
    pass


class ParseError(VnSplitError, ValueError):
    """Malformed input document; ``line`` and ``column`` locate the problem."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnknownFixture(VnSplitError, KeyError):
    pass
