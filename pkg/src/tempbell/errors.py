"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment, state or configuration input."""


class InsufficientStatistics(ZeroDivisionError):
    """An estimate needs runs that the data does not contain."""
