"""Exception types raised across the package."""


class DiceBenchError(Exception):
    pass


class DimensionMismatch(DiceBenchError, ValueError):
    pass


class ThresholdOutOfRange(DiceBenchError, ValueError):
    pass


class EmptyStack(DiceBenchError, ValueError):
    pass


class ValueOutOfRange(DiceBenchError, ValueError):
    pass


class IoFailure(DiceBenchError, OSError):
    pass


class MalformedHeader(DiceBenchError, ValueError):
    pass


class SolutionMismatch(DiceBenchError, ValueError):
    pass


class TooLarge(DiceBenchError, ValueError):
    pass


class InvalidFraction(DiceBenchError, ValueError):
    pass


class InvalidRadius(DiceBenchError, ValueError):
    pass


class SourceNotFound(DiceBenchError, FileNotFoundError):
    pass
