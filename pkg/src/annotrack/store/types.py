"""Record types for the persistence layer."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from ..errors import ValidationError
from ..ingest import LabelSetDescriptor


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Project:
    id: str
    name: str
    label_set: LabelSetDescriptor
    created_at: str
    config: dict = field(default_factory=dict, compare=False)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.label_set.labels


@dataclass(frozen=True)
class TrackMeta:
    track_id: str
    project_id: str
    num_points: int
    start_time: float
    end_time: float
    num_annotations: int


@dataclass(frozen=True)
class AnnotatorRecord:
    """A human user or a named model iteration that produces labels."""

    id: str
    kind: str  # "human" | "model"
    name: str
    iteration: str | None = None
    role: str | None = None

    def __post_init__(self):
        if self.kind not in ("human", "model"):
            raise ValidationError(f"bad annotator kind: {self.kind!r}")
        if self.kind == "model" and not self.iteration:
            raise ValidationError("model annotators need an iteration")
        if self.kind == "human" and not self.role:
            raise ValidationError("human annotators need a role")

    @property
    def display_name(self) -> str:
        if self.kind == "model":
            return f"{self.name}:{self.iteration}"
        return self.name


@dataclass(frozen=True)
class AnnotationRecord:
    id: str
    subject: str  # track_id or segment_id
    label: str
    annotator_id: str
    verified: bool
    created_at: str

    def superseded(self) -> "AnnotationRecord":
        return replace(self)


@dataclass(frozen=True)
class RunwayRecord:
    runway_id: str
    latitude_deg: float
    longitude_deg: float
    altitude_m: float
    heading_deg: float
    length_m: float


@dataclass(frozen=True)
class SegmentRecord:
    """A registered track segment: the annotatable unit after preprocessing.

    Geometry summaries (bbox, time span) are precomputed at registration so
    queries never re-read the parent track's points.
    """

    segment_id: str
    track_id: str
    start_idx: int
    end_idx: int  # half-open
    avg_direction_deg: float | None
    runway_id: str | None
    feature: tuple[float, ...]
    contains_contact: bool
    climbs_out: bool
    num_points: int
    start_time: float
    end_time: float
    bbox: tuple[float, float, float, float]  # min_lat, min_lon, max_lat, max_lon
    set_index: int | None = None


@dataclass(frozen=True)
class Query:
    """Conjunctive subject filters; absent fields do not constrain."""

    label: str | None = None
    annotator: str | None = None  # "name" or "name:iteration"
    verified: bool | None = None
    runway_id: str | None = None
    set_index: int | None = None
    bbox: tuple[float, float, float, float] | None = None
    time_range: tuple[float, float] | None = None
    limit: int | None = None
    offset: int = 0

    def __post_init__(self):
        if self.limit is not None and self.limit < 1:
            raise ValidationError("limit must be >= 1")
        if self.offset < 0:
            raise ValidationError("offset must be >= 0")

    @property
    def has_annotation_filter(self) -> bool:
        return (
            self.label is not None
            or self.annotator is not None
            or self.verified is not None
        )


@dataclass(frozen=True)
class OpLogEntry:
    """One annotation operation, for downstream effort accounting."""

    seq: int
    kind: str  # "single" | "batch" | "ingest"
    annotator_id: str
    annotator_kind: str
    annotator_display: str
    subjects: tuple[str, ...]
    label: str | None
    created_at: str


@dataclass
class TrackDetail:
    track: object  # geo.Track
    meta: TrackMeta
    annotations: list[AnnotationRecord]
    segment: SegmentRecord | None = None


def annotator_matches(annotator: AnnotatorRecord, query_value: str) -> bool:
    """Match a query's annotator filter: exact display name, or base name."""
    if ":" in query_value:
        return annotator.display_name == query_value
    return annotator.name == query_value


EXPORT_HEADER = (
    "subject_id,label,annotator_name,annotator_iteration,"
    "annotator_kind,verified,created_at"
)
