"""Exception hierarchy.

Validation problems derive from :class:`InvalidInputError` (a ``ValueError``),
numerical failures from :class:`NumericalError` (an ``ArithmeticError``).  The
CLI maps the two families onto distinct exit codes.
"""


class StateSecrecyError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(StateSecrecyError, ValueError):
    pass


class NumericalError(StateSecrecyError, ArithmeticError):
    pass


class NotStableError(InvalidInputError):
    pass


class NotPositiveDefiniteError(InvalidInputError):
    pass


class UnitCircleEigenvalueError(InvalidInputError):
    pass


class SingularAError(InvalidInputError):
    pass


class NotBlockOrderedError(InvalidInputError):
    pass


class BadIndexError(InvalidInputError):
    pass


class BadProbabilitiesError(InvalidInputError):
    pass


class TooShortError(InvalidInputError):
    pass


class ScenarioError(InvalidInputError):
    pass


class SingularMatrixError(NumericalError):
    pass


class MatrixOverflowError(NumericalError, OverflowError):
    pass


class NumericalBreakdownError(NumericalError):
    pass


class DesignMismatchError(NumericalError):
    """Two independent formulas for the weighting matrix disagree."""


class DesyncError(StateSecrecyError, RuntimeError):
    """Decoder reference time disagrees with the sensor's."""


class NoCriticalTrialsWarning(UserWarning):
    pass
