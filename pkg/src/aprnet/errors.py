"""Exception types shared across the package."""


class AprnetError(Exception):
    """Base class for package-specific failures."""


class ConfigError(AprnetError):
    """Invalid configuration: bad flag values, impossible splits, missing files."""


class DataError(AprnetError):
    """Malformed data: unparsable cells, non-finite inputs, empty tables."""


class CheckpointFormatError(AprnetError):
    """Checkpoint magic/version does not match."""


class CheckpointCorruptError(AprnetError):
    """Checkpoint file ends before the declared payload."""
