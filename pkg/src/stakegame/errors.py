class StakeGameError(Exception):
    """Base class for package errors."""


class DomainError(StakeGameError, ValueError):
    """An argument lies outside the domain of the model function."""


class ConfigError(StakeGameError, ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConvergenceError(StakeGameError, RuntimeError):
    """Root finding did not converge. ``bracket`` holds the last bracket."""

    def __init__(self, message, bracket=None):
        self.bracket = bracket
        super().__init__(message)
