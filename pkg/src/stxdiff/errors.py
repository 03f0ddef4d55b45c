"""Exception hierarchy shared by all modules."""


class StxdiffError(Exception):
    """Base class for errors raised by the package."""


class InvalidArgument(StxdiffError, ValueError):
    pass


class Unsupported(StxdiffError, NotImplementedError):
    pass


class DomainError(StxdiffError, ValueError):
    """A state lies outside the entropy domain."""


class NumericError(StxdiffError, ArithmeticError):
    def __init__(self, message, element_id=None):
        super().__init__(message)
        self.element_id = element_id


class HypothesisViolation(StxdiffError, ValueError):
    """Model parameters violate the structural assumptions of the scheme."""


class OutOfDomain(StxdiffError, ValueError):
    """A point lies outside the space-time cylinder."""


class SolverError(StxdiffError, RuntimeError):
    pass
