"""
Error types shared by the services, the CLI and the HTTP layer.
"""
from enum import IntEnum
from typing import Optional


class ExitCode(IntEnum):
    """Process exit status of the CLI commands."""
    OK = 0
    INTERNAL = 1
    USAGE = 2  # reserved by click
    PARSE_FAILURE = 3
    CERTIFICATE_VIOLATION = 4
    ORACLE_NON_CONVERGENCE = 5
    INVARIANT_FAILURE = 6


class SchedulingError(Exception):
    """Base class for all domain errors."""


class InstanceError(SchedulingError):
    """Invalid, empty or degenerate problem instance."""


class InstanceParseError(InstanceError):
    """Instance file could not be read; carries the offending line when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ParameterError(SchedulingError):
    """Algorithm parameter outside its domain (delta, target speed, level)."""


class CertificateViolation(SchedulingError):
    """The dual certificate contradicts the run it certifies."""


class OracleLimitError(SchedulingError):
    """Instance too large for subset enumeration."""
