"""Exception hierarchy shared by every gradix module."""


class GradixError(Exception):
    """Base class for all gradix errors."""


class UsageError(GradixError, ValueError):
    """Invalid call: wrong dimensions, wrong tape, wrong case kind."""


class DomainError(GradixError, ArithmeticError):
    """Elementary operation evaluated outside its domain (e.g. division by zero)."""


class NonFiniteError(GradixError, FloatingPointError):
    """A loss or residual evaluated to NaN or infinity."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SingularityError(GradixError, ArithmeticError):
    """Angular operator evaluated too close to a pole (|sin theta| ~ 0)."""


class AssumptionError(GradixError, ValueError):
    """A theorem assumption (e.g. positive coercivity margin) is violated."""


class TrainingAbort(GradixError, RuntimeError):
    """Optimization aborted; ``snapshot`` carries the last finite state."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}
