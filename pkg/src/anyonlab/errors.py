"""Exception hierarchy shared across the package.

Each class maps to a distinct CLI exit code (see cli.py).
"""


class AnyonLabError(Exception):
    """Base class for all package errors."""


class ConfigError(AnyonLabError):
    """Invalid or inconsistent run configuration."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class GridMismatchError(AnyonLabError):
    """Two objects built on different grids were combined."""


class SingularKernelError(AnyonLabError):
    """Kernel evaluated at its singular point (x = 0 with R = 0)."""


class BlowUpError(AnyonLabError):
    """Non-finite values appeared during time integration."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"non-finite field values at t = {t:.6g}")


class BoundaryViolationError(AnyonLabError):
    """Too much mass near the computational boundary."""


class BudgetExceededError(AnyonLabError):
    """Requested problem exceeds the configured memory budget."""


class KrylovBreakdownError(AnyonLabError):
    """Lanczos recurrence broke down during exponential propagation."""
