"""Exception types shared across the package."""


class PortrailError(Exception):
    """Base class for all package errors."""


class SimulationError(PortrailError):
    """The event kernel was driven outside its contract (e.g. scheduling in the past)."""


class LifecycleError(PortrailError):
    """A train lifecycle transition violated the servicing state machine."""


class ScenarioError(PortrailError):
    """Invalid scenario document, preset name, or parameter combination."""


class DataFormatError(PortrailError):
    """Malformed operational data file (CSV schema or value errors)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
