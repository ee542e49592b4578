"""Exception hierarchy. The CLI maps InputError to exit code 2 and NumericError to 3."""

from __future__ import annotations


class TracelensError(Exception):
    """Base class for all package errors."""


class InputError(TracelensError, ValueError):
    """Bad user input: malformed files, unknown names, invalid models."""


class LogParseError(InputError):
    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class VocabularyError(InputError):
    def __init__(self, message: str, names: list[str] | None = None) -> None:
        super().__init__(message)
        self.names = list(names or [])


class DtmcError(InputError):
    pass


class PropertySyntaxError(InputError):
    def __init__(self, message: str, position: int, text: str = "", line: int | None = None) -> None:
        where = f"line {line}, column {position + 1}" if line is not None else f"position {position}"
        super().__init__(f"{message} at {where}")
        self.position = position
        self.text = text
        self.line = line


class CheckError(InputError):
    """Evaluation-time failures: unknown labels or reward structures, bad filters."""


class ModelFormatError(InputError):
    pass


class NumericError(TracelensError, ArithmeticError):
    """Numerical failure (NaN in EM, unsolvable linear system)."""
