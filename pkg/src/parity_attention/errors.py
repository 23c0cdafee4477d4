"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CapacityError(ValueError):
    """An exhaustive computation was requested above the enumeration ceiling."""


class NumericFailure(ArithmeticError):
    """Training produced a non-finite risk or gradient."""

    def __init__(self, step, message="non-finite risk or gradient"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class UnsupportedMode(ValueError):
    """The requested attention mode cannot be used for this operation."""
