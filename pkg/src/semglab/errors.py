"""Exception types shared across the package."""


class SemglabError(Exception):
    """Base class for all package-specific errors."""


class FieldRangeError(SemglabError, ValueError):
    """A frame field is outside its encodable range."""


class ConfigError(SemglabError, ValueError):
    """A configuration value is inconsistent or unsupported."""


class FormatError(SemglabError, ValueError):
    """A file does not match the on-disk format."""


class ValidationError(SemglabError, ValueError):
    """Recorded data violates a channel-range invariant."""


class ArgumentError(SemglabError, ValueError):
    """An operation argument is out of its documented domain."""


class FilterDesignError(SemglabError, ValueError):
    """A requested filter cannot be designed stably."""


class EmptySplitError(SemglabError, ValueError):
    """A split selector matched no windows on one side."""


class DataError(SemglabError, ValueError):
    """Training data cannot support the requested fit."""


class NumericError(SemglabError, ArithmeticError):
    """A numerical routine failed (singular matrix, divergence)."""


class DegenerateInputError(SemglabError, ValueError):
    """A metric input is degenerate (e.g. all-zero reference)."""


class CalibrationError(SemglabError, ValueError):
    """Not enough samples to calibrate."""


class PhaseConflictError(SemglabError, RuntimeError):
    """A session control request is illegal in the current phase."""

    def __init__(self, message: str, phase: str):
        super().__init__(message)
        self.phase = phase


class StreamUnderrunError(SemglabError, RuntimeError):
    """A live stream stopped delivering samples."""
