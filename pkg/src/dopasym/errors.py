"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): validation
problems with the inputs, and numerical failures that might go away with
more precision or a different discretisation.
"""

from __future__ import annotations


class DopasymError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(DopasymError, ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(DopasymError, ArithmeticError):
    """A numerical procedure failed to reach its target accuracy."""


# validation ---------------------------------------------------------------


class NonPositiveDensity(ValidationError):
    pass


class Unnormalized(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class NodeMismatch(ValidationError):
    pass


class DegreeOutOfRange(ValidationError):
    pass


class ExceptionalC(ValidationError):
    pass


class MultiBand(ValidationError):
    pass


class EdgeMismatch(ValidationError):
    pass


class TooCloseToEdge(ValidationError):
    pass


class RegionMismatch(ValidationError):
    pass


class EdgeTypeMismatch(ValidationError):
    pass


class BadSpec(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class WrongGapType(ValidationError):
    pass


# numerical ----------------------------------------------------------------


class PrecisionExhausted(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class DegenerateBandDetection(NumericalError):
    pass


class RankDeficiency(NumericalError):
    pass
