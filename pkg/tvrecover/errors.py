class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class UndefinedRatioError(InvalidInputError):
    """Raised when a normalized ratio has a zero denominator (e.g. TV = 0)."""


class UsageError(InvalidInputError):
    """Raised for unknown suite ids and malformed command-line input."""


class RipBudgetError(RuntimeError):
    """
    Raised when exhaustive RIP estimation would scan more supports than allowed.
    Use estimate_rip_sampled for larger problems.
    """
