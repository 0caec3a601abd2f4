"""Exception hierarchy shared by every module."""


class CompTreeError(ValueError):
    """Base class for all errors raised by comptree."""


class NegativeEntry(CompTreeError):
    pass


class SumOutOfTolerance(CompTreeError):
    pass


class DimensionMismatch(CompTreeError):
    pass


class NonPositivePrediction(CompTreeError):
    pass


class EmptyData(CompTreeError):
    pass


class InconsistentSampleCount(CompTreeError):
    pass


class InvalidTree(CompTreeError):
    pass


class TooLarge(CompTreeError):
    pass


class MissingParams(CompTreeError):
    pass


class TooFewSamples(CompTreeError):
    pass
