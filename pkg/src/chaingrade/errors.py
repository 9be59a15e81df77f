class ChaingradeError(Exception):
    """Base class for all errors raised by chaingrade."""


class ShapeError(ChaingradeError, ValueError):
    pass


class MonotonicityError(ChaingradeError, ValueError):
    pass


class DegenerateRangeError(ChaingradeError, ValueError):
    """Raised when a grading function has M == m."""


class BudgetExceededError(ChaingradeError):
    pass


class InfeasibleError(ChaingradeError, ValueError):
    pass


class ConvergenceError(ChaingradeError, RuntimeError):
    pass
