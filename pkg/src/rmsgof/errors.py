"""Exception hierarchy.

Every error raised by the library derives from :class:`GofError`. The two
intermediate classes decide the CLI exit status: problems with the input
data exit with 3, numerical breakdowns exit with 4.
"""


class GofError(Exception):
    exit_code = 1


class DataError(GofError, ValueError):
    exit_code = 3


class NumericError(GofError, ArithmeticError):
    exit_code = 4


class ParameterOutOfDomain(DataError):
    pass


class InvalidCounts(DataError):
    pass


class InsufficientData(DataError):
    pass


class EstimateAtBoundary(DataError):
    pass


class OverflowMassTooLarge(DataError):
    """Too many draws fell past the retained bins of a truncated model."""

    def __init__(self, message, overflow_fraction=None, epsilon=None):
        super().__init__(message)
        self.overflow_fraction = overflow_fraction
        self.epsilon = epsilon


class ModelFileError(DataError):
    pass


class DegenerateProbability(NumericError):
    pass


class TruncationOverflow(NumericError):
    pass


class RankDeficientConstraints(NumericError):
    pass


class SpectrumAnomaly(NumericError):
    pass


class MaxSubdivisionExceeded(NumericError):
    pass


class UnsupportedOrder(NumericError):
    pass
