"""Exception hierarchy shared by every memfill module."""


class MemfillError(Exception):
    """Base class for all library errors."""


class ContractViolationError(MemfillError):
    """A documented precondition or invariant was violated by the caller."""


class FormatError(MemfillError):
    """A serialized file is malformed (bad magic, truncation, bad values)."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DiagnosticError(MemfillError):
    """A bounded iterative procedure failed to reach its goal."""
