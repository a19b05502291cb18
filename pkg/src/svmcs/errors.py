"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration / argument problems
exit with 2, numerical solver problems with 3.
"""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class UnsupportedDimensionError(InvalidArgumentError):
    """Requested dimension exceeds the shipped Sobol direction numbers."""


class DuplicatePointError(InvalidArgumentError):
    """Two points coincide; training data must have distinct points."""


class DegenerateBoxError(InvalidArgumentError):
    """A box has zero width along some dimension."""


class DegenerateTrainingError(InvalidArgumentError):
    """Training data contains only one class."""


class EmptyIntervalError(InvalidArgumentError):
    """No admissible bandwidth exists for a probe point.

    Carries the offending probe (and its index, when known).
    """

    def __init__(self, message, probe=None, index=None):
        super().__init__(message)
        self.probe = probe
        self.index = index


class IsolatedPointError(InvalidArgumentError):
    """A grid point has no neighbor within the refinement radius."""


class SingularDesignError(InvalidArgumentError):
    """Design matrix is rank deficient."""


class ClassifierFormatError(InvalidArgumentError):
    """A serialized classifier file has the wrong format or version."""


class NumericalConditioningError(ArithmeticError):
    """A matrix required to be symmetric positive definite is not."""


class SolverFailureError(RuntimeError):
    """An iterative solver failed to converge within its iteration cap."""
