"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 1),
numerical failures from :class:`NumericalError` (CLI exit code 2).
"""


class MourreLabError(Exception):
    """Base class for all package errors."""


class ValidationError(MourreLabError, ValueError):
    """Input or configuration rejected before any computation."""


class NumericalError(MourreLabError, ArithmeticError):
    """A numerical routine failed or produced an empty result."""


class ZeroCoupling(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class NotGapless(ValidationError):
    pass


class ConicalPoint(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class WindowTooSmall(ValidationError):
    pass


class WindowMismatch(ValidationError):
    pass


class MarginTooLarge(ValidationError):
    pass


class BadAnnulus(ValidationError):
    pass


class NotAlternatingAdmissible(ValidationError):
    pass


class AllZero(ValidationError):
    pass


class NoEdgeState(ValidationError):
    pass


class EmptyProjector(NumericalError):
    pass


class SolveFailure(NumericalError):
    pass


class SingularPivot(SolveFailure):
    pass


class NoConvergence(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass
