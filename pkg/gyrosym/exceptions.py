"""Exception hierarchy for gyrosym."""
from typing import Any, Dict, Optional


class GyroSymError(ValueError):
    """Base class for every error raised by gyrosym."""


class NotSkew(GyroSymError):
    pass


class NotTangent(GyroSymError):
    pass


class Degenerate(GyroSymError):
    pass


class OffSphere(GyroSymError):
    pass


class NotClosed(GyroSymError):
    pass


class NotInvariant(GyroSymError):
    pass


class PoleSingular(GyroSymError):
    pass


class StepRejected(GyroSymError):
    pass


class NonInvariantData(GyroSymError):
    pass


class WindowTooShort(GyroSymError):
    pass


class ParseError(GyroSymError):
    """Malformed scenario text; carries the 1-based line and column."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class ValidationError(GyroSymError):
    """A scenario parsed but violates an invariant of the model."""

    def __init__(self, invariant: str, message: str, detail: Optional[Dict[str, Any]] = None):
        self.invariant = invariant
        self.detail = detail or {}
        super().__init__(f"[{invariant}] {message}")


class ScenarioNotFound(GyroSymError):
    pass
