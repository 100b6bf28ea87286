"""Shared exception types."""


class ConfigError(ValueError):
    """A configuration value is malformed or out of its allowed range."""


class UndefinedStatError(ValueError):
    """A per-arm statistic was requested before the arm was ever sampled,
    or a discounted count below its defining threshold."""
