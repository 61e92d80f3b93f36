"""Base error type carrying a machine-readable code.

Every operational failure in the package raises a subclass of SpanlabError
with a stable ``code`` string; the HTTP layer maps codes to status codes and
the CLI prints them verbatim.  Context keyword arguments (line numbers,
violation lists, upstream bodies) ride along in ``context``.
"""

from __future__ import annotations

from typing import Any


class SpanlabError(Exception):
    def __init__(self, code: str, message: str, **context: Any):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.context = context
