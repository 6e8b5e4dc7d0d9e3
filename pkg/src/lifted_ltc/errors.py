"""Exception hierarchy shared by every module."""


class LiftedLTCError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(LiftedLTCError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class StructuralError(LiftedLTCError, ValueError):
    """Coordinate sets, layers or moduli do not line up."""


class ResourceError(LiftedLTCError, RuntimeError):
    """An enumeration guard would be exceeded."""

    def __init__(self, message: str, guard: str | None = None):
        super().__init__(message)
        self.guard = guard


class UnsupportedError(LiftedLTCError, ValueError):
    """The requested combination is not supported (e.g. non-adjacent layers)."""


class ConfigError(LiftedLTCError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ReplayMismatch(LiftedLTCError):
    """A replayed run diverged from its recorded report."""

    def __init__(self, metric: str, recorded, replayed):
        super().__init__(f"metric {metric!r} diverged: recorded {recorded!r}, replayed {replayed!r}")
        self.metric = metric
