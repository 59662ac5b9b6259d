# src/core/errors.py

from typing import Iterable, Optional


class OmniVQAError(Exception):
    """Base class for every error the pipeline raises on purpose."""

    exit_code = 1


class DataError(OmniVQAError):
    """Input data is malformed, inconsistent or degenerate."""

    exit_code = 1


class UsageError(OmniVQAError):
    """The caller asked for something that cannot be done as requested."""

    exit_code = 2


class ArgumentError(UsageError, ValueError):
    pass


class DecodeError(DataError):
    def __init__(self, frame_index: int, message: str):
        self.frame_index = frame_index
        super().__init__(f"Frame {frame_index}: {message}")


class ParseError(DataError):
    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class RangeError(DataError, ValueError):
    pass


class SchemaError(DataError):
    pass


class DimensionError(ArgumentError):
    def __init__(self, expected: tuple, actual: tuple):
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dimension mismatch: expected {expected}, got {actual}")


class ModelLoadError(SchemaError):
    pass


class TrainingError(DataError):
    def __init__(self, message: str, missing: Optional[Iterable[tuple]] = None):
        self.missing = sorted(missing) if missing else []
        if self.missing:
            pairs = ", ".join(f"{a}/{b}" for a, b in self.missing)
            message = f"{message}: {pairs}"
        super().__init__(message)


class ScoreError(DataError):
    pass


class FitError(DataError):
    pass
