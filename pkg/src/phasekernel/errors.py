"""Exception and warning types shared across the package."""


class EngineError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidParameter(EngineError, ValueError):
    """An argument violates an operation's precondition."""


class GridMismatch(EngineError):
    """Two discretized objects do not live on the same time grid."""


class SingularTime(EngineError):
    """The final time sits on (or too close to) a caustic of the oscillator."""


class PinDegenerate(EngineError):
    """The pin Gram matrix fails the admissibility condition."""


class DegenerateDeterminant(EngineError):
    """A determinant prefactor vanishes or its defining operator is singular."""


class BranchCrossing(EngineError):
    """A complex logarithm could not be continued along a sampled ray."""


class ContourDivergent(EngineError):
    """A contour integrand fails to decay within the truncation radius."""


class UsageError(EngineError):
    """Command-line arguments are malformed or inconsistent."""


class CausticBranchWarning(UserWarning):
    """Emitted when an oscillator propagator is evaluated past its first caustic.

    Values on later branches are computable with principal square roots, but
    the extra phase picked up at each caustic is not tracked.
    """
