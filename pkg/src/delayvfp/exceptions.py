"""Exception hierarchy shared by all submodules."""


class DelayVFPError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(DelayVFPError, ValueError):
    pass


class DomainError(DelayVFPError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ValidityError(DomainError):
    """Parameters violate the inequalities under which a rate estimate holds."""


class NoPositiveRateError(DelayVFPError, ValueError):
    pass


class DivergenceError(DelayVFPError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConvergenceError(DelayVFPError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(DelayVFPError, ValueError):
    def __init__(self, message, line=None, key=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class InternalError(DelayVFPError, RuntimeError):
    """Buffer or bookkeeping misconfiguration; indicates a bug in the caller."""
