"""Exception types shared across the package.

The command line maps these onto exit codes, so library code should raise
the most specific type that applies rather than bare ValueError.
"""


class ConfigurationError(ValueError):
    """A configuration value is out of range or inconsistent."""


class DimensionError(ConfigurationError):
    """Array shapes do not line up; the message names the offending axes."""


class BatchSizeError(ConfigurationError):
    """An operation received a batch too small to be meaningful."""


class ContractError(TypeError):
    """An API was called in a way its contract forbids."""


class ProtocolError(RuntimeError):
    """An evaluation protocol cannot be built from the given trials."""


class NumericAbort(FloatingPointError):
    """Training or estimation produced a non-finite value and stopped."""
