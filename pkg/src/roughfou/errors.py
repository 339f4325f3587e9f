"""Exception hierarchy shared by all modules."""


class RoughFOUError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RoughFOUError, ValueError):
    """Malformed input: wrong symmetry, bad config field, unknown flavor..."""


class DomainError(ValidationError):
    """A parameter lies outside the supported mathematical domain."""


class ShapeError(ValidationError):
    """Arrays or grids that must agree do not."""


class SizeError(ValidationError):
    """Problem size exceeds a cost guard."""


class FlavorError(ValidationError):
    """A lift of the wrong flavor (Stratonovich vs Ito) was supplied."""


class NumericError(RoughFOUError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class EstimationError(RoughFOUError):
    """The Gram matrix of a path is singular or too ill-conditioned to invert."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition
