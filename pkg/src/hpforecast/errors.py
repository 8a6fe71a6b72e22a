"""Exception hierarchy shared by all modules."""


class HPFError(Exception):
    pass


class InvalidArgument(HPFError, ValueError):
    pass


class OutOfDomain(HPFError, ValueError):
    """A feature vector lies outside the region of the segment asked about."""


class ResourceLimit(HPFError, RuntimeError):
    pass


class NumericError(HPFError, ArithmeticError):
    pass


class ContractViolation(HPFError, AssertionError):
    """A runtime regularity condition needed by a regret bound was broken."""
