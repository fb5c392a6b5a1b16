"""Exception types shared across the package."""


class RsbcError(Exception):
    """Base class for all package errors."""


class ContractViolation(RsbcError, ValueError):
    """An argument breaks a structural contract (shape, symmetry, dimension)."""


class DomainError(RsbcError, ValueError):
    """A numerically valid input lies outside the mathematical domain."""


class PreconditionError(RsbcError, ValueError):
    """A documented precondition of an operation does not hold."""


class CapacityError(RsbcError, ValueError):
    """The requested problem size exceeds the enumerable regime."""


class NumericalError(RsbcError, RuntimeError):
    """An internal numerical procedure failed to produce a usable result."""


class SplitInfeasibleError(NumericalError):
    """The explicit three-user split lies outside its validity domain.

    The closed-form stream assignment is built from constant-gap
    inequalities; at finite SNR a channel can violate them, in which case
    no assignment with the closed-form sum exists and the exact LP optimum
    falls below it (by a bounded amount).
    """


class ChannelParseError(RsbcError, ValueError):
    """A channel file could not be parsed.

    Carries the 1-based line number where parsing failed.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
