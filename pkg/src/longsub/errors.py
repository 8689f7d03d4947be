"""Exception and warning types raised across the package."""


class LongsubError(Exception):
    """Base class for all errors raised by longsub."""


class EmptyDataset(LongsubError):
    pass


class InsufficientVisits(LongsubError):
    """A subject has too few observations for a per-subject spline fit."""


class EmptyGroup(LongsubError):
    pass


class DegenerateDomain(LongsubError):
    pass


class DuplicateKnots(LongsubError):
    pass


class DimensionMismatch(LongsubError, ValueError):
    pass


class InvalidRho(LongsubError, ValueError):
    pass


class SingularSystem(LongsubError, ArithmeticError):
    """The accumulated normal equations could not be factorized.

    ``context`` carries whatever the raising site knows about the failing
    block (subject id, covariate/group pair, design block name).
    """

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context


class InvalidK(LongsubError, ValueError):
    pass


class AllCandidatesFailed(LongsubError):
    pass


class LengthMismatch(LongsubError, ValueError):
    pass


class ShapeMismatch(LongsubError, ValueError):
    pass


class TooFewSubjects(LongsubError, ValueError):
    pass


class DivisionByZero(LongsubError, ZeroDivisionError):
    pass


class MissingColumn(LongsubError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NonConstantBaseline(LongsubError, ValueError):
    def __init__(self, subject, column):
        super().__init__(f"baseline column {column!r} varies within subject {subject!r}")
        self.subject = subject
        self.column = column


class NonNumericCell(LongsubError, ValueError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column


class ConfigError(LongsubError, ValueError):
    pass


class NonConvergedWarning(UserWarning):
    """Backfitting hit ``max_sweeps`` before memberships stabilised."""
