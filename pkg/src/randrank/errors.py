"""Exception hierarchy shared by all modules."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class CapacityError(ValidationError):
    """Request exceeds a hard size cap (exact enumeration)."""


class DegenerateScoresError(ValidationError):
    """Scores have zero spread and cannot be normalized."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""
