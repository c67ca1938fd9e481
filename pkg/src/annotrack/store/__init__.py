"""Annotation persistence: shared semantics with pluggable backends."""

from .base import Store
from .memory import FileStore, MemoryStore
from .sql import SqlStore
from .types import (
    AnnotationRecord,
    AnnotatorRecord,
    OpLogEntry,
    Project,
    Query,
    RunwayRecord,
    SegmentRecord,
    TrackDetail,
    TrackMeta,
)

__all__ = [
    "AnnotationRecord",
    "AnnotatorRecord",
    "FileStore",
    "MemoryStore",
    "OpLogEntry",
    "Project",
    "Query",
    "RunwayRecord",
    "SegmentRecord",
    "SqlStore",
    "Store",
    "TrackDetail",
    "TrackMeta",
]
