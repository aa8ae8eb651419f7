"""Exception types shared across the pipeline."""

from __future__ import annotations


class FleetlensError(Exception):
    """Base class for all pipeline errors."""


class UnknownLabel(FleetlensError):
    """A label is neither canonical nor a registered alias."""


class ParseError(FleetlensError):
    """A text input could not be parsed.

    Carries enough position information to point an annotator at the
    offending row or line.
    """

    def __init__(self, message: str, *, line: int | None = None, column: str | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class DuplicateRecordId(FleetlensError):
    """Two manifest rows share the same record_id."""


class EmptyInput(FleetlensError):
    """An operation that requires at least one element got none."""


class DegenerateSplit(FleetlensError):
    """The requested split would leave a partition empty."""


class EmptyPartition(FleetlensError):
    """A built dataset partition ended up with no usable records."""


class MixedGroup(FleetlensError):
    """Predictions handed to a tally disagree on plate, task, or backend."""


class MissingTruth(FleetlensError):
    """A prediction or tally has no ground-truth label to score against."""


class DuplicateTally(FleetlensError):
    """More than one tally was supplied for the same plate."""


class BackendUnavailable(FleetlensError):
    """Transient backend failure; the call may be retried."""


class BackendTimeout(FleetlensError):
    """The backend did not answer in time; the call may be retried."""


class ProtocolError(FleetlensError):
    """The backend answered with something outside the wire contract.

    Never retried: the response would be just as malformed next time.
    """


class NotFound(FleetlensError):
    """The requested entity does not exist in the store."""


class InvalidQuery(FleetlensError):
    """A search query violates the query contract."""


class StoreCorrupt(FleetlensError):
    """Event-log replay hit a checksum mismatch."""
