class DatasetError(ValueError):
    """Malformed or inconsistent dataset on disk or in memory."""


class ConfigError(ValueError):
    """Invalid configuration key or value."""


class NumericalError(RuntimeError):
    """Non-finite values or a failed factorization during computation."""
