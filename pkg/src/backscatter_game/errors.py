from __future__ import annotations

class DomainError(ValueError):
    """An argument lies outside the domain of a model function.

    ``field`` names the offending parameter when one can be identified.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConfigError(ValueError):
    """Invalid experiment configuration, strategy combination or cache."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.key and not msg.startswith(self.key):
            msg = f"{self.key}: {msg}"
        if self.line is not None:
            msg = f"line {self.line}: {msg}"
        return msg
