"""Exception types shared across the toolkit."""


class RumsimError(Exception):
    """Base class for toolkit errors."""


class ConfigError(RumsimError, ValueError):
    """Invalid configuration value or combination."""


class SchemaError(RumsimError, ValueError):
    """A variable reference or column binding does not resolve."""


class ShapeError(RumsimError, ValueError):
    """Array dimensions incompatible with the operation."""


class ParameterizationError(RumsimError, ValueError):
    """Degenerate correlation parameterization (zero row-norm remainder)."""


class NumericError(RumsimError, ArithmeticError):
    """Non-finite intermediate value; message names the offending slot."""


class DivergenceError(RumsimError, ArithmeticError):
    """Optimization produced a NaN loss; carries the loss trace prefix."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = [] if trace is None else list(trace)
