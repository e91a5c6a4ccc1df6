"""Exception hierarchy shared across the package."""


class QplocError(Exception):
    """Base class for all package errors."""


class InfeasibleSolution(QplocError):
    """A solution violates one of the assignment/capacity/cardinality rules."""


class DimensionMismatch(QplocError, ValueError):
    pass


class ParseError(QplocError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SizeGuard(QplocError, ValueError):
    """Raised when an exact/exhaustive routine is asked to handle a too-large instance."""


class InfeasibleInstance(QplocError):
    pass


class NumericalFailure(QplocError, RuntimeError):
    pass


class IndexOutOfRange(QplocError, IndexError):
    pass


class UnbalancedProblem(QplocError, ValueError):
    pass


class InvalidCardinality(QplocError, ValueError):
    pass


class RlfInfeasible(QplocError):
    pass


class GapInfeasible(QplocError):
    pass


class TimeLimit(QplocError):
    pass
