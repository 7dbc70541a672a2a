"""Exception types raised across the package.

Everything derives from :class:`ISQError` so callers (and the CLI) can catch a
single base class. Validation failures also derive from :class:`ValueError`.
"""


class ISQError(Exception):
    """Base class for all package errors."""


class ValidationError(ISQError, ValueError):
    pass


class NegativeEntry(ValidationError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"negative entry {value!r} at index {index}")


class ColumnSumViolation(ValidationError):
    def __init__(self, column, value):
        self.column = column
        self.value = value
        super().__init__(f"column {column} sums to {value!r}, expected 1")


class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class TimeNotInFamily(ISQError, KeyError):
    pass


class NotHermitian(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class NotDoublyStochastic(ValidationError):
    pass


class InvalidArgs(ValidationError):
    pass


class InvalidProblem(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class EigenDecompositionFailure(ISQError):
    pass


class StepTooSmall(ValidationError):
    pass


class EvaluationFailure(ISQError):
    pass


class TimeBeforeInteraction(ValidationError):
    pass


class ZeroProbabilityOutcome(ISQError):
    pass


class UnboundedDistribution(ISQError):
    pass


class StepUnstable(ISQError):
    pass


class BasisTooLarge(ISQError):
    pass


class QuadratureUnderflow(ISQError):
    pass


class OrderUnsupported(ValidationError):
    pass


class SchemaViolation(ISQError):
    pass


class ModuleFailure(ISQError):
    pass


class OutputDirUnwritable(ISQError, OSError):
    pass
