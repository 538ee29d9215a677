"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for invalid or degenerate input, 3 for numerical failure.
"""


class LabError(Exception):
    exit_code = 3


class InvalidInputError(LabError, ValueError):
    exit_code = 2


class ResolutionError(InvalidInputError):
    """Grid too coarse for the requested mode count."""


class DegenerateFieldError(InvalidInputError):
    """Field is numerically zero where a nonzero one is required."""


class DegenerateParameterError(InvalidInputError):
    """Parameter sits on (or too close to) a bifurcation value."""


class BranchNotBornError(InvalidInputError):
    """Requested branch does not exist at this parameter."""


class PreconditionError(InvalidInputError):
    pass


class SizeMismatchError(InvalidInputError):
    pass


class ConstructionError(InvalidInputError):
    """Counterexample diffusion recipe constraints violated."""


class NumericalFailureError(LabError):
    pass


class FixedPointNotFoundError(NumericalFailureError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ContinuationBreakdownError(NumericalFailureError):
    pass


class BlowUpError(NumericalFailureError):
    pass


class DegenerateEquilibriumError(NumericalFailureError):
    """Linearization is not hyperbolic within tolerance."""


class StructuralInconsistencyError(LabError):
    exit_code = 1
