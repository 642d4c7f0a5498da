"""Exception types shared across the package.

All validation-style failures derive from :class:`FusionSimError` so callers
(and the CLI) can distinguish bad input (exit code 2) from I/O trouble
(exit code 1).
"""


class FusionSimError(Exception):
    """Base class for all fusionsim errors."""


class NotationError(FusionSimError):
    """A fusion-setup string does not follow the ``(A,B)-(C)`` notation."""


class PartitionError(FusionSimError):
    """A set of fusion groups is not a valid partition of the task set."""


class MutationError(FusionSimError):
    """A merge/split mutation cannot be applied to the given setup."""


class AppSpecError(FusionSimError):
    """An application specification is malformed or inconsistent."""


class SimulationError(FusionSimError):
    """A simulation run was asked to do something contradictory."""


class TraceError(FusionSimError):
    """Trace contents violate the trace contract (wrong setup, empty, ...)."""


class TraceSchemaError(TraceError):
    """A persisted trace file does not match the JSONL trace schema."""
