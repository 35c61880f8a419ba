"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is outside its documented domain."""


class PoolParseError(ValueError):
    """A pool or score file violates the line-delimited record schema."""


class ContractViolation(RuntimeError):
    """A caller broke an API contract, e.g. re-querying a labeled example."""
