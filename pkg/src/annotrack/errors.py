"""Error types shared across the library.

Every error raised by the store, pipeline, or workflow layers is one of
these, so the HTTP layer can map exceptions to status codes totally.
"""


class AnnotrackError(Exception):
    """Base class for all library errors."""


class ValidationError(AnnotrackError, ValueError):
    """Input violates a documented precondition or invariant."""


class UndefinedDirectionError(ValidationError):
    """A direction was requested for a zero-length horizontal displacement."""


class NotFoundError(AnnotrackError, LookupError):
    """A referenced project, track, annotator, or model does not exist."""


class WorkflowLockError(AnnotrackError):
    """A workflow run is already in progress for this project."""


class StorageError(AnnotrackError):
    """The persistence backend failed mid-operation."""
