"""Custom exceptions for condyr."""

from __future__ import annotations

from typing import Optional


class CondyrError(RuntimeError):
    """Raised on unrecoverable configuration, data or query errors."""


class ConfigError(CondyrError):
    """Invalid configuration value (YAML file, environment or flag)."""


class InvalidTermError(CondyrError):
    """A term violates the IRI/literal/blank-node field rules."""


class UnknownIdError(CondyrError):
    """A term id was never issued by the dictionary."""


class EmptySnapshotError(CondyrError):
    """An ingested version snapshot contains no quads."""


class StoreFormatError(CondyrError):
    """A store archive is truncated, corrupted or of another format version."""


class NQuadsParseError(CondyrError):
    """An N-Quads input file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        location = path or "<input>"
        if line is not None:
            location = f"{location}:{line}"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


class QueryError(CondyrError):
    """Base class for errors raised while parsing or planning a query."""


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnsupportedFeatureError(QueryError):
    def __init__(self, feature: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"Unsupported SPARQL feature: {feature}{where}")
        self.feature = feature
        self.line = line
        self.column = column


class UndefinedPrefixError(QueryError):
    def __init__(self, prefix: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: undefined prefix '{prefix}:'")
        self.prefix = prefix
        self.line = line
        self.column = column


class UnknownVariableError(QueryError):
    """A grouping key, aggregate or projection names a variable that is not in scope."""


class BackendError(CondyrError):
    """The optional relational backend is unavailable or rejected a statement."""


class InvariantViolation(CondyrError):
    """Internal state contradicts a store or result invariant."""
