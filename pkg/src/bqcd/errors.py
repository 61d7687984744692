"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration: bad parameters, incompatible procedure/scenario, etc."""


class DomainError(ValueError):
    """Observation outside the joint support of a channel's densities."""
