"""Exception types shared across the package."""


class EvpipeError(Exception):
    """Base class for all errors raised by evpipe."""


class ConfigError(EvpipeError, ValueError):
    """A configuration violates its invariants."""


class ParseError(EvpipeError, ValueError):
    """An input file could not be parsed.

    Exactly one of ``offset`` (binary files, byte offset) or ``line``
    (CSV files, 1-based line number) is set.
    """

    def __init__(self, message, *, offset=None, line=None):
        where = ""
        if offset is not None:
            where = f" (byte offset {offset})"
        elif line is not None:
            where = f" (line {line})"
        super().__init__(message + where)
        self.offset = offset
        self.line = line


class EventParseError(ParseError):
    """An event file could not be parsed."""


class InsufficientDataError(EvpipeError, ValueError):
    """Not enough samples, frames or history for the requested operation."""


class SingularSystemError(EvpipeError, ValueError):
    """A linear system is singular or rank deficient."""


class EstimationError(EvpipeError, RuntimeError):
    """An estimator failed to produce a valid result.

    ``diagnostics`` carries solver-specific details.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DomainError(EvpipeError, ValueError):
    """An input lies outside the valid domain of a model."""


class GenerationError(EvpipeError, RuntimeError):
    """Synthetic data generation could not satisfy the requested scene."""
