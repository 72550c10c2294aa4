# src/errors.py
from __future__ import annotations
from typing import Optional


class PathfieldError(Exception):
    """Base class for every error the CLI turns into exit code 2."""


class ParseError(PathfieldError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"{message}{where}")


class DimensionError(PathfieldError):
    pass


class StratificationLimitError(PathfieldError):
    pass


class QuadratureError(PathfieldError):
    def __init__(self, message: str, error: Optional[float] = None):
        self.error = error
        super().__init__(message)


class PolicyError(PathfieldError):
    pass


class ConfigError(PathfieldError, ValueError):
    """Bad run settings or field parameters."""
