"""Exception types raised by the library."""


class ParameterError(ValueError):
    """An argument value is outside its valid range."""


class ConfigurationError(ValueError):
    """A structural constraint between configuration values is violated."""


class DimensionError(ValueError):
    """Array shapes do not match the operator or model dimensions."""


class NumericsError(RuntimeError):
    """A numerical quantity became non-finite; diagnostics attached when available."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
