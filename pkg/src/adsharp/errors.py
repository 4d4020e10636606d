"""Shared exception types."""


class ConfigError(ValueError):
    """An invalid or inconsistent experiment configuration."""
