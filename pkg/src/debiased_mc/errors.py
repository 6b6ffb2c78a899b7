"""Exception hierarchy for the debiasing library.

Infeasible-design errors share a base class so the CLI can map them to a
dedicated exit code; everything else raises builtins (ValueError for bad
arguments) or the specific classes below.
"""


class DebiasError(Exception):
    """Base class for library-specific errors."""


class UnsupportedQueryError(DebiasError):
    """An operation was asked of a law or model that cannot answer it."""


class InfeasibleDesignError(DebiasError):
    """Base for configurations that cannot produce a finite-variance or
    finite-cost estimator."""


class DivergentCostError(InfeasibleDesignError):
    """Law/model pairing with infinite expected cost (e.g. exponential-cost
    levels under a survival tail that decays slower than 1/2 per level)."""


class InfeasibleLawError(InfeasibleDesignError):
    """Survival-law parameters outside the finite-variance window."""


class InfeasibleBudgetError(InfeasibleDesignError):
    """Design budget too small to admit any feasible law."""


class DegenerateDesignError(InfeasibleDesignError):
    """All design weights vanish (constant sequence); no profile exists."""


class GuardExhaustedError(DebiasError):
    """An adaptive replicate hit its hard level cap before stopping.

    The replicate must be reported as failed, never silently truncated,
    so that accepted output stays unbiased.
    """

    def __init__(self, message: str, level: int):
        super().__init__(message)
        self.level = level


class LevelGenerationError(DebiasError):
    """A sequence model failed while producing a level; carries the index."""

    def __init__(self, message: str, level: int):
        super().__init__(message)
        self.level = level


class DerivativeZeroError(LevelGenerationError):
    """Newton update hit a zero derivative; no remedy is attempted."""


class InvalidLevelError(DebiasError):
    """A level outside the model's supported range was requested."""


class InvalidStateError(DebiasError):
    """A computed intermediate value is non-finite."""
