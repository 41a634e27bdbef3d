"""Exception types shared across the package."""


class VesselFSGError(Exception):
    """Base class for all package errors."""


class ParameterError(VesselFSGError, ValueError):
    """Invalid physical or numerical parameter."""


class OutOfRangeError(VesselFSGError, ValueError):
    """Input outside the representable range (e.g. exponential overflow)."""


class GeometryError(VesselFSGError):
    """Degenerate geometry: collapsed lumen, nonpositive radius, ..."""


class ConvergenceError(VesselFSGError):
    """An iterative solver failed to reach its tolerance.

    ``residual`` holds the last residual measure, ``history`` the
    per-iteration residual norms when the solver tracks them.
    """

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class StagnationError(VesselFSGError):
    """Iterates stopped changing (e.g. vanishing residual increment)."""


class ConfigError(VesselFSGError, ValueError):
    """Configuration file problem; ``path`` is the offending field path."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class SimulationAbort(VesselFSGError):
    """A scenario failed mid-run; ``records`` holds the completed steps."""

    def __init__(self, message, records=None, cause=None):
        super().__init__(message)
        self.records = list(records) if records is not None else []
        self.cause = cause
