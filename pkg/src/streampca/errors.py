"""Exception types raised by the estimators and the benchmark harness."""


class StreamPCAError(Exception):
    """Base class for package errors."""


class DimensionError(StreamPCAError, ValueError):
    """Input vector or matrix does not match the state it is applied to."""


class NonFiniteError(StreamPCAError, ValueError):
    """Input contains NaN or infinite entries."""


class DivergenceError(StreamPCAError, ArithmeticError):
    """An update overflowed; the previous state is the last finite one."""


class DegeneracyError(StreamPCAError, ArithmeticError):
    """Two eigenvalues are too close for a first-order perturbation step.

    ``indices`` holds the colliding (0-based) positions in the eigenvalue vector.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class SecularConvergenceError(StreamPCAError, ArithmeticError):
    """Root finder hit its iteration cap with a residual above tolerance."""

    def __init__(self, message, bracket=None, residual=None):
        super().__init__(message)
        self.bracket = bracket
        self.residual = residual


class ConfigError(StreamPCAError, ValueError):
    """Experiment configuration is invalid or infeasible."""


class CSVFormatError(StreamPCAError, ValueError):
    """CSV input is ragged or holds a non-numeric token."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column
