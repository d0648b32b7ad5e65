"""
Exception hierarchy for the engine.

Every error also derives from the builtin a caller would naturally catch, so
``except ValueError`` keeps working around argument and format problems.
"""


class AwnError(Exception):
    """Base class for all engine errors."""


class ArgumentError(AwnError, ValueError):
    """An argument is outside its documented domain."""


class WidthError(ArgumentError):
    """A width-factor or width list is invalid."""


class DimensionError(AwnError, ValueError):
    """Tensor shapes or extents do not agree."""


class DataFormatError(AwnError, ValueError):
    """A dataset file does not match its binary format."""


class DataConsistencyError(AwnError, ValueError):
    """Two dataset files disagree with each other."""


class ModelStateError(AwnError, RuntimeError):
    """An operation was called in the wrong model state."""


class VariantError(AwnError, ValueError):
    """The model variant does not support the requested operation."""


class ConfigError(AwnError, ValueError):
    """A run configuration is malformed."""


class CheckpointError(AwnError, ValueError):
    """A checkpoint file is malformed or has an unknown version."""
