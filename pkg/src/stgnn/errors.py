"""Exception hierarchy shared across the package."""


class StgnnError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StgnnError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(StgnnError):
    """A caller violated an operation's precondition."""


class NumericError(StgnnError):
    """A numerical routine failed to produce a usable result."""


class ConfigError(StgnnError):
    """Invalid or inconsistent configuration."""


class DatasetError(StgnnError):
    """Base class for dataset loading failures."""


class BadMagicError(DatasetError):
    """A binary file does not start with the expected magic/version."""


class TruncatedFileError(DatasetError):
    """A tensor file ends before the record it claims to contain."""


class CountMismatchError(DatasetError):
    """Manifest tallies disagree with the materialized example list."""


class CheckpointError(StgnnError):
    """A model checkpoint is malformed or inconsistent with its config."""
