from __future__ import annotations

__all__ = ["DomainError", "CacheFormatError", "StoreConflictError"]


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation.

    Kept distinct from a mathematical zero: recursion sums silently drop
    unstable or out-of-range terms, the public API never does.
    """


class CacheFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StoreConflictError(RuntimeError):
    """Two different values were produced for the same key."""
