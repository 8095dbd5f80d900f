"""Custom exceptions for the diqkdsps package.

The main exception class is DiqkdError, which carries an ErrorCode for
programmatic handling. ConfigError adds the dot path of the offending config
key, and its line when it came from a file, so the CLI can point at it.
"""

from typing import Optional
from diqkdsps.enums import ErrorCode


class DiqkdError(Exception):
    """Raised when a model, solver or config operation cannot complete.

    Attributes:
        message: Human-readable error message.
        code: Optional ErrorCode for programmatic error handling.

    Example:
        ```python
        from diqkdsps import binary_entropy, DiqkdError, ErrorCode

        try:
            binary_entropy(1.5)
        except DiqkdError as e:
            if e.code == ErrorCode.INVALID_PARAMETER:
                print(e.message)
        ```
    """

    def __init__(self, message: str, code: Optional[ErrorCode] = None) -> None:
        super().__init__(message)
        self.message = message
        self.code = code


class ConfigError(DiqkdError):
    """Raised when an experiment config is malformed.

    Attributes:
        position: Dot path of the offending key (e.g. ``"source.eta1"``), or
            None when the whole file is at fault.
        line: 1-based line of the offending key in the TOML file, when known.
        detail: The message without the location suffix.
    """

    def __init__(self, message: str, position: Optional[str] = None, line: Optional[int] = None) -> None:
        where = ", ".join(part for part in (position, f"line {line}" if line else None) if part)
        super().__init__(f"{message} (at {where})" if where else message, ErrorCode.CONFIG_ERROR)
        self.detail = message
        self.position = position
        self.line = line

    def at_line(self, line: int) -> "ConfigError":
        """Copy of this error located at ``line``."""
        return ConfigError(self.detail, self.position, line)
