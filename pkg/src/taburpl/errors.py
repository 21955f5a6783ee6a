"""Exception types shared across the simulator."""


class TaburplError(Exception):
    """Base class for all simulator errors."""


class ConnectivityError(TaburplError):
    """Raised when some nodes have no route to the sink."""

    def __init__(self, orphans, message=None):
        self.orphans = sorted(orphans)
        super().__init__(message or f"nodes unreachable from sink: {self.orphans}")


class InvalidWeightError(TaburplError):
    """Weight vector violates non-negativity or the unit-sum constraint."""


class ContextError(TaburplError):
    """Normalization context does not belong to the snapshot being costed."""


class InvalidPathError(TaburplError):
    """Edge sequence is not a connected chain ending at the sink."""


class InvalidAssignmentError(TaburplError):
    """Parent assignment contains a cycle or a non-neighbor parent."""


class SizeLimitError(TaburplError):
    """Instance too large for exhaustive enumeration."""


class UndefinedCorrelationError(TaburplError):
    """Pearson correlation undefined (zero variance or too few points)."""


class UndefinedMetricError(TaburplError):
    """KPI undefined for this trace (e.g. no packets were sent)."""


class InsufficientDataError(TaburplError):
    """Not enough samples for the requested statistic."""


class InvalidReferenceError(TaburplError):
    """Hypervolume reference point not dominated by every front point."""


class PairingError(TaburplError):
    """Two KPI sets cannot be paired (mismatched seed lists)."""


class TraceParseError(TaburplError):
    """Malformed trace line."""

    def __init__(self, line_no, line, reason):
        self.line_no = line_no
        self.line = line
        super().__init__(f"trace line {line_no}: {reason}: {line!r}")


class UsageError(TaburplError):
    """Bad command-line or config input."""
