"""Exception hierarchy shared by all hitlace modules."""


class ChainError(Exception):
    """Base class for all hitlace errors."""


# -- matrix ingestion ------------------------------------------------------

class NonSquare(ChainError):
    pass


class RowSumViolation(ChainError):
    """Carries a ``violations`` list of (row, row_sum, most_negative_entry)."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class NegativeEntry(RowSumViolation):
    pass


class BadTarget(ChainError):
    pass


# -- chain structure -------------------------------------------------------

class Reducible(ChainError):
    pass


class ZeroStationaryMass(ChainError):
    pass


class NotReversible(ChainError):
    pass


class SymmetrizationFailure(ChainError):
    pass


class TargetNotAbsorbing(ChainError):
    pass


# -- links and intertwinings -----------------------------------------------

class DimensionMismatch(ChainError):
    pass


class NotStochasticLink(ChainError):
    pass


class ZeroDenominator(ChainError):
    """The linking recipe hit a zero mass; the primary path is impossible
    under the declared (initial law, kernel) pair."""


class SupportMismatch(ChainError):
    pass


# -- block machinery -------------------------------------------------------

class NonConvergence(ChainError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


# -- partition chain -------------------------------------------------------

class OutOfRange(ChainError):
    pass


# -- interlaced-spectra pipeline --------------------------------------------

class InterlacingViolated(ChainError):
    pass


class AmbiguousMatching(ChainError):
    pass


class NonPositiveMass(ChainError):
    pass


class UnmatchedMassError(ChainError):
    pass


class NotStarShaped(ChainError):
    pass


class InvalidWeights(ChainError):
    pass


# -- compound-geometric representation --------------------------------------

class MonotonicityViolated(ChainError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InvalidTail(ChainError):
    pass


# -- CLI ---------------------------------------------------------------------

class EmptySubset(ChainError):
    pass


class ParseError(ChainError):
    pass


class InvariantViolation(ChainError):
    """An internal identity that must hold by construction failed; indicates
    corrupted upstream input rather than a recoverable condition."""
