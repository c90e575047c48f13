# core/errors.py
"""
Exception hierarchy. Library code raises these; cli/main.py maps them to exit codes:
ValidationError family -> 1, RasterIOError family -> 2.
"""

from typing import Optional


class TempweakError(Exception):
    exit_code = 1


# === Validation / argument errors (exit 1) ===

class ValidationError(TempweakError, ValueError):
    exit_code = 1


class ShapeError(ValidationError):
    pass


class InvalidClassError(ValidationError):
    pass


class ArgumentError(ValidationError):
    pass


class ManifestParseError(ValidationError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class InfeasibleDerangementError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class MissingPredictionError(ValidationError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"no change prediction for record {record_id!r}")


# === I/O errors (exit 2) ===

class RasterIOError(TempweakError, OSError):
    exit_code = 2


class MaskNotFoundError(RasterIOError):
    def __init__(self, record_id: str, path: Optional[str] = None):
        self.record_id = record_id
        where = f" ({path})" if path else ""
        super().__init__(f"mask for record {record_id!r} is unavailable{where}")
