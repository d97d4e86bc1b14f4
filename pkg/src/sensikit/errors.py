"""Exception hierarchy shared across the package."""


class SensikitError(Exception):
    """Base class for all errors raised by sensikit."""


class ParseError(SensikitError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


class UndeclaredIdentifierError(ParseError):
    pass


class DimensionError(SensikitError):
    pass


class DomainError(SensikitError):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message, subexpression=None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message} in '{subexpression}'"
        super().__init__(message)


class SingularMatrixError(SensikitError):
    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)


class CyclingError(SensikitError):
    pass


class InfeasibleError(SensikitError):
    pass


class UnboundedError(SensikitError):
    pass


class IndefiniteError(SensikitError):
    """Reduced Hessian is not positive semidefinite."""


class KKTCheckError(SensikitError):
    """A solver output failed the independent KKT residual check."""


class GuardExceededError(SensikitError):
    pass


class NotStationaryError(SensikitError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class EmptyPolytopeError(SensikitError):
    pass


class RegularityError(SensikitError):
    """The regularity conditions required by a method are not certified."""

    def __init__(self, message, failed=()):
        self.failed = tuple(failed)
        super().__init__(message)


class ToleranceConflictError(SensikitError):
    """A numerical outcome contradicts a certificate issued under tolerances."""


class NotAnLPError(SensikitError):
    pass


class BasisError(SensikitError):
    pass


class RegimeError(SensikitError):
    pass


class StructureError(SensikitError):
    """Problem does not have the structure an operation requires."""


class LineSearchError(SensikitError):
    def __init__(self, message, x=None):
        self.x = x
        super().__init__(message)


class NonConvergenceError(SensikitError):
    def __init__(self, message, x=None):
        self.x = x
        super().__init__(message)


class KinkError(SensikitError):
    """Cone projection is not differentiable at the requested point."""


class ActiveSetChangeError(SensikitError):
    """Active set differs across a finite-difference stencil."""


class CorrectorDivergenceError(SensikitError):
    def __init__(self, message, trace=None, step=None):
        self.trace = trace
        self.step = step
        super().__init__(message)
