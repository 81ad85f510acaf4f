"""
Typed errors shared by every rnd-desk module
"""

from typing import Any, Dict, Optional


class RndDeskError(Exception):
    """Base class; `category` and `exit_code` drive the CLI exit status"""

    category = "error"
    exit_code = 1


class InvalidArgumentError(RndDeskError, ValueError):
    category = "invalid-argument"
    exit_code = 2


class ConfigError(InvalidArgumentError):
    pass


class ShapeError(RndDeskError, ValueError):
    category = "shape-error"
    exit_code = 3


class InvalidStateError(RndDeskError, RuntimeError):
    category = "invalid-state"
    exit_code = 4


class NonFiniteError(RndDeskError, FloatingPointError):
    """Raised when a loss or statistic stops being finite"""

    category = "non-finite"
    exit_code = 5

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IdxParseError(RndDeskError, ValueError):
    """IDX decoding failure at a given byte offset"""

    category = "parse-error"
    exit_code = 6

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagicError(IdxParseError):
    pass


class TruncatedHeaderError(IdxParseError):
    pass


class SizeMismatchError(IdxParseError):
    pass


class UnsupportedDtypeError(IdxParseError):
    pass


class SnapshotError(RndDeskError, ValueError):
    category = "parse-error"
    exit_code = 6


class CheckFailedError(RndDeskError):
    category = "check-failed"
    exit_code = 7
