"""Exception hierarchy shared by every module of the package."""


class HeckeRaiseError(Exception):
    """Base class for all errors raised by hecke_raise."""


class NotPrime(HeckeRaiseError, ValueError):
    pass


class BadExponent(HeckeRaiseError, ValueError):
    pass


class BadLevel(HeckeRaiseError, ValueError):
    pass


class NotOnP1(HeckeRaiseError, ValueError):
    pass


class DimensionMismatch(HeckeRaiseError, ValueError):
    pass


class LevelMismatch(HeckeRaiseError, ValueError):
    pass


class BoundTooLarge(HeckeRaiseError, ValueError):
    pass


class SubspaceNotInvariant(HeckeRaiseError, ArithmeticError):
    """An operator failed to preserve a subspace it must preserve.

    This signals a bug in the space or operator construction, never bad input.
    """


class LatticeError(HeckeRaiseError, ArithmeticError):
    """A matrix that must be integral on a lattice picked up a denominator."""


class InsufficientEigenvalues(HeckeRaiseError, ValueError):
    pass


class HypothesisFailed(HeckeRaiseError, ValueError):
    pass


class NoWitness(HeckeRaiseError):
    """The simultaneous eigen-module has no primitive vector.

    Under the level-raising hypotheses this contradicts the theorem, so the
    per-stage kernel sizes are carried along for diagnosis.
    """

    def __init__(self, message, stages=None):
        super().__init__(message)
        self.stages = list(stages or [])


class ParseError(HeckeRaiseError, ValueError):
    pass


class CoverageGap(HeckeRaiseError, ValueError):
    pass


class UnknownFormatVersion(HeckeRaiseError, ValueError):
    pass
