"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: parameter/precondition problems exit
with 2, numerical non-convergence with 3.
"""


class BiharmError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(BiharmError, ValueError):
    """Invalid or inadmissible input parameters, or a violated precondition."""


class DivergentIntegralError(BiharmError, ArithmeticError):
    """An integral required to be finite diverges.

    Carries enough context to name the violated exponent inequality.
    """

    def __init__(self, message: str, *, location: str = "", exponent: float | None = None):
        super().__init__(message)
        self.location = location
        self.exponent = exponent


class NonConvergenceError(BiharmError, RuntimeError):
    """An iteration failed to converge; carries the iteration trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
