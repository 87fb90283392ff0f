"""Error type carrying a stable machine-readable code."""

from __future__ import annotations


class MfiqError(ValueError):
    """Raised by every library operation; ``code`` is a short snake_case tag."""

    def __init__(self, code: str, message: str = "", **details):
        self.code = code
        self.message = message
        self.details = details
        super().__init__(f"{code}: {message}" if message else code)
