"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2), data
problems (3) and numerical failures of an estimator (4).
"""


class UpeError(Exception):
    exit_code = 1


class ConfigError(UpeError, ValueError):
    exit_code = 2


class DataError(UpeError, ValueError):
    exit_code = 3


class NumericalError(UpeError, ArithmeticError):
    exit_code = 4


class EmptySample(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class DegenerateSample(DataError):
    pass


class NonPositiveOutcome(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"missing column {column!r}")
        self.column = column


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        where = f" ({', '.join(loc)})" if loc else ""
        super().__init__(f"{message}{where}")
        self.row = row
        self.column = column


class EmptyAfterCleaning(DataError):
    pass


class WrongTargetCount(DataError):
    pass


class AllOneClass(NumericalError):
    pass


class RankDeficientDesign(NumericalError):
    pass


class SeparationDetected(NumericalError):
    pass


class FitNotConverged(NumericalError):
    pass


class SingularHessian(NumericalError):
    pass


class NumericalUnderflow(NumericalError):
    pass


class DensityNearZero(NumericalError):
    pass


class ZeroDenominator(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class PivotMismatch(ConfigError):
    pass


class UnsupportedDistribution(ConfigError):
    pass


class MinimumReps(ConfigError):
    pass
