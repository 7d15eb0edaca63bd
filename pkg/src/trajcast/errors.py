"""Error taxonomy shared across the package and the CLI exit-code mapping."""


class UsageError(ValueError):
    """Bad flags, unknown config keys, or invalid parameter combinations."""


class DataError(ValueError):
    """Malformed or missing input data, or incompatible checkpoints."""


class NumericError(RuntimeError):
    """Non-finite values produced during training or inference."""
