"""Exception hierarchy shared by the solver, the validators and the CLI."""

from typing import Optional


class RnpsimError(Exception):
    """Base class for every error raised by rnpsim."""


class DomainError(RnpsimError, ValueError):
    """Argument outside the domain of a potential or resolvent operation."""


class StructuralError(RnpsimError, ValueError):
    """Array shapes do not match the grid or each other."""


class NumericalError(RnpsimError, RuntimeError):
    """An iterative solve failed or produced non-finite values."""

    def __init__(
        self,
        message: str,
        residual: Optional[float] = None,
        iterations: Optional[int] = None,
    ) -> None:
        self.residual = residual
        self.iterations = iterations
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        if iterations is not None:
            message = f"{message} after {iterations} iterations"
        super().__init__(message)


class ConfigError(RnpsimError, ValueError):
    """Problem in a configuration file, optionally tied to a line number."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        self.reason = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(RnpsimError, ValueError):
    """Coefficients or initial data failed validation."""

    def __init__(self, messages: list[str]) -> None:
        self.messages = list(messages)
        super().__init__("; ".join(self.messages) or "validation failed")
