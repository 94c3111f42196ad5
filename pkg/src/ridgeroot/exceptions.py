"""Exception hierarchy for the ridgeroot package.

Numerical failures derive from :class:`NumericError` so callers can
distinguish "the algorithm could not produce a number" from bad inputs
(:class:`InputError`).
"""


class RidgeRootError(Exception):
    """Base class for all ridgeroot errors."""


class InputError(RidgeRootError, ValueError):
    """Invalid user-supplied data or configuration."""


class NumericError(RidgeRootError, ArithmeticError):
    """A numerical routine failed to converge or hit a singularity."""


# ---- model / SSCP construction ----

class RankDeficientError(InputError):
    """X lacks full row rank or C lacks full column rank."""


class NotEstimableError(InputError):
    """C'(XX')^{-1}C is not positive definite."""


class NonPositiveLambdaError(InputError):
    """The ridge parameter must be strictly positive."""


class DimensionMismatchError(InputError):
    """Matrix dimensions are incompatible."""


class EigenFailureError(NumericError):
    """The symmetric eigensolver did not converge."""


# ---- Stieltjes transform / grids ----

class PoleHitError(NumericError):
    """Evaluation point coincides with a spectrum eigenvalue."""


class DegenerateSpectrumError(NumericError):
    """The residual spectrum has no positive eigenvalue to work with."""


class DegenerateTransformError(NumericError):
    """The empirical Stieltjes transform (or its derivative) is too close to zero."""


class InversionFailureError(NumericError):
    """Newton and bisection both failed to invert the Stieltjes transform."""

    def __init__(self, index: int, target: complex, message: str = ""):
        self.index = index
        self.target = target
        super().__init__(
            f"could not invert transform for grid point {index} (target {target}): {message}"
        )


# ---- measure fitting ----

class LpInfeasibleError(NumericError):
    """The weight-selection LP reported infeasibility (signals a solver bug)."""


class EmptyMeasureError(NumericError):
    """Weight truncation removed every atom of the fitted measure."""


class DomainViolationError(InputError):
    """Functional evaluated outside its domain h < lambda / sigma_max."""


# ---- edge parameter estimation ----

class NoRootError(NumericError):
    """Bracketing failed for an equation that must have a root."""


class NonConvergenceError(NumericError):
    """An iterative solver exhausted its iteration budget."""


class InitFailureError(NumericError):
    """Newton iteration for the ODE initial value failed."""


class SingularDenominatorError(NumericError):
    """1 - H2*zeta fell below tolerance before the integration endpoint."""


class BetaOutOfRangeError(NumericError):
    """x^2 s'(x) never crosses 1/gamma1 on the integrated range."""

    def __init__(self, target: float, achieved_range: tuple, message: str = ""):
        self.target = target
        self.achieved_range = achieved_range
        hint = (
            "consider a smaller margin; if gamma1 is very small the crossing "
            "lies too close to the spectral edge"
        )
        super().__init__(
            f"no crossing of x^2 s'(x) = {target:.6g} inside the table "
            f"(achieved range {achieved_range[0]:.6g}..{achieved_range[1]:.6g}); "
            f"{message or hint}"
        )


# ---- testing / power ----

class MismatchedLambdaError(InputError):
    """Largest-root result and edge parameters were computed at different lambdas."""


class UnsupportedOrderError(InputError):
    """Spectral moments beyond order r = 2 are not provided."""


class AllPointsFailedError(NumericError):
    """Every lambda grid point failed during data-driven selection."""


# ---- CLI / IO ----

class CsvFormatError(InputError):
    """Malformed CSV matrix input."""


class SpecValidationError(InputError):
    """Invalid simulation experiment specification."""
