"""Exception types shared across the package."""


class FwaveError(Exception):
    """Base class for all package errors."""


class FormatError(FwaveError):
    """A recording or annotation file does not conform to its format."""


class ConfigError(FwaveError):
    """Invalid configuration (filter band, pipeline config, CLI args)."""


class SignalTooShortError(FwaveError):
    """Input signal is too short for the requested operation."""


class ExtractionError(FwaveError):
    """Template building or f-wave extraction failed for a window."""


class VotingError(FwaveError):
    """The voting set is incomplete or inconsistent."""


class NoUsableWindowsError(FwaveError):
    """A pipeline run produced zero usable analysis windows."""
