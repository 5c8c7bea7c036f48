"""Exception hierarchy shared by the solver, simulator and CLI."""


class RetirementError(Exception):
    """Base class for all package errors."""


class DomainError(RetirementError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedRegimeError(DomainError):
    """The parameter regime has no finite value function or is not analysed."""


class UnsupportedControlError(UnsupportedRegimeError):
    """The optimal Markov control is undefined in this regime."""


class SolverError(RetirementError, ArithmeticError):
    """Root finding did not converge.

    ``bracket`` holds the last (lo, hi) interval in the solver's variable.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegenerateEstimateError(RetirementError):
    """No path reached the target before the censoring horizon."""


class UnattainableError(RetirementError):
    """A search exhausted its budget; ``best`` is the best value achieved."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StrategyParseError(DomainError):
    """Malformed strategy text."""


class TransformError(RetirementError):
    """The unit-diffusion transform could not be built."""


class CertificateError(RetirementError):
    """A nonnegativity certificate was requested for an ineligible diffusion."""
