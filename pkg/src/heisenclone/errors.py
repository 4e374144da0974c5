"""Exception hierarchy shared by the library and the command-line tool.

Every error carries a machine-readable payload so that the CLI can emit a
single JSON error object on stderr and exit with a stable code:

* 2 -- invalid input or violated precondition (:class:`ValidationError`)
* 3 -- a configured resource cap would be exceeded (:class:`ResourceError`)
* 4 -- a numerical procedure failed to converge (:class:`NumericError`)
"""

from __future__ import annotations


class HeisencloneError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_json(self) -> dict:
        """Machine-readable error object."""
        obj = {"error": self.kind, "message": self.message}
        if self.details:
            obj["details"] = self.details
        return obj


class ValidationError(HeisencloneError):
    """Malformed input or a violated operation precondition."""

    exit_code = 2
    kind = "validation"


class ResourceError(HeisencloneError):
    """A computation would exceed a configured resource cap."""

    exit_code = 3
    kind = "resource"


class NumericError(HeisencloneError):
    """A numerical procedure failed (non-convergence, unbounded result)."""

    exit_code = 4
    kind = "numeric"
