"""User-defined descriptor parsing and track file ingestion.

Track files are delimited text whose column names and units are declared in
a YAML descriptor supplied by the user, so arbitrary sensor formats can be
ingested without code changes. The airport-vicinity filter and the dataset
splitter used by the iteration workflow also live here.
"""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone

import yaml

from .errors import ValidationError
from .geo import (
    METERS_PER_FOOT,
    METERS_PER_NM,
    GeoPoint,
    Track,
    TrackPoint,
    haversine_distance_m,
)

REQUIRED_ROLES = ("timestamp", "latitude", "longitude", "altitude", "track_id")

ROLE_UNITS = {
    "timestamp": ("epoch_seconds", "iso8601"),
    "latitude": ("degrees",),
    "longitude": ("degrees",),
    "altitude": ("meters", "feet"),
    "track_id": ("string",),
}

# Fraction of malformed rows above which a file is rejected outright.
MAX_BAD_ROW_FRACTION = 0.10


@dataclass(frozen=True)
class ColumnSpec:
    source: str
    unit: str


@dataclass(frozen=True)
class TrackFormatDescriptor:
    """Mapping from a user file's columns onto the five required roles."""

    format_name: str
    delimiter: str
    columns: dict[str, ColumnSpec]
    extra_columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class LabelSetDescriptor:
    """The ordered label vocabulary of one annotation project."""

    project_name: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class AnnotationIngestDescriptor:
    """Declares the algorithm, version, and labels of an external label file."""

    algorithm: str
    version: str
    labels: tuple[str, ...]

    @property
    def annotator_name(self) -> str:
        return f"{self.algorithm}:{self.version}"


@dataclass(frozen=True)
class FilterCriteria:
    """Airport-vicinity inclusion criteria applied per position update."""

    airport_ref: GeoPoint
    radius_nm: float
    agl_ceiling_ft: float

    def __post_init__(self):
        if self.radius_nm <= 0 or self.agl_ceiling_ft <= 0:
            raise ValidationError("filter radius and ceiling must be positive")


@dataclass
class TrackParseResult:
    tracks: list[Track]
    rejected_rows: list[tuple[int, str]] = field(default_factory=list)

    @property
    def num_rejected(self) -> int:
        return len(self.rejected_rows)


@dataclass(frozen=True)
class ExternalAnnotation:
    """A pre-label produced outside the service, not yet human-verified."""

    subject: str
    label: str
    annotator_name: str
    verified: bool = False


@dataclass
class AnnotationIngestResult:
    records: list[ExternalAnnotation]
    errors: list[tuple[int, str]] = field(default_factory=list)


def _load_yaml_mapping(text: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("descriptor must be a YAML mapping")
    return doc


def parse_format_descriptor(text: str) -> TrackFormatDescriptor:
    """Parse and validate a track position format descriptor."""
    doc = _load_yaml_mapping(text)
    name = doc.get("format_name")
    if not name:
        raise ValidationError("descriptor missing 'format_name'")
    delimiter = doc.get("delimiter", ",")
    if not isinstance(delimiter, str) or len(delimiter) != 1:
        raise ValidationError("'delimiter' must be a single character")
    raw_columns = doc.get("columns")
    if not isinstance(raw_columns, dict):
        raise ValidationError("descriptor missing 'columns' mapping")

    columns: dict[str, ColumnSpec] = {}
    for role in REQUIRED_ROLES:
        entry = raw_columns.get(role)
        if entry is None:
            raise ValidationError(f"missing required role: {role!r}")
        if not isinstance(entry, dict) or "source" not in entry:
            raise ValidationError(f"role {role!r} needs a 'source' column name")
        unit = str(entry.get("type", ROLE_UNITS[role][0]))
        if unit not in ROLE_UNITS[role]:
            raise ValidationError(
                f"unknown unit {unit!r} for role {role!r}; "
                f"expected one of {ROLE_UNITS[role]}"
            )
        columns[role] = ColumnSpec(source=str(entry["source"]), unit=unit)
    for role in raw_columns:
        if role not in REQUIRED_ROLES:
            raise ValidationError(f"unknown column role: {role!r}")

    extras = tuple(str(c) for c in doc.get("extra_columns", []) or [])
    sources = [c.source for c in columns.values()] + list(extras)
    dupes = {s for s in sources if sources.count(s) > 1}
    if dupes:
        raise ValidationError(f"duplicate source columns: {sorted(dupes)}")
    return TrackFormatDescriptor(
        format_name=str(name),
        delimiter=delimiter,
        columns=columns,
        extra_columns=extras,
    )


def parse_label_set(text: str) -> LabelSetDescriptor:
    """Parse a project label set descriptor."""
    doc = _load_yaml_mapping(text)
    project = doc.get("project")
    if not project:
        raise ValidationError("label set missing 'project'")
    raw = doc.get("labels")
    if not isinstance(raw, list) or not raw:
        raise ValidationError("label set needs a non-empty 'labels' list")
    names = []
    for item in raw:
        name = item.get("name") if isinstance(item, dict) else item
        if not name or not isinstance(name, str):
            raise ValidationError(f"bad label entry: {item!r}")
        names.append(name)
    if len(set(names)) != len(names):
        raise ValidationError("label names must be unique")
    return LabelSetDescriptor(project_name=str(project), labels=tuple(names))


def parse_annotation_descriptor(
    text: str, label_set: LabelSetDescriptor | None = None
) -> AnnotationIngestDescriptor:
    """Parse an external annotation descriptor, checking labels if a set is given."""
    doc = _load_yaml_mapping(text)
    for key in ("algorithm", "version", "labels"):
        if key not in doc:
            raise ValidationError(f"annotation descriptor missing {key!r}")
    labels = tuple(str(v) for v in doc["labels"])
    if label_set is not None:
        unknown = [v for v in labels if v not in label_set.labels]
        if unknown:
            raise ValidationError(f"labels not in project label set: {unknown}")
    return AnnotationIngestDescriptor(
        algorithm=str(doc["algorithm"]), version=str(doc["version"]), labels=labels
    )


def _parse_timestamp(value: str, unit: str) -> float:
    if unit == "epoch_seconds":
        return float(value)
    # iso8601; a trailing Z means UTC, naive values are treated as UTC
    text = value.strip().replace("Z", "+00:00")
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def parse_track_file(data: bytes | str, desc: TrackFormatDescriptor) -> TrackParseResult:
    """Parse delimited track position text into Tracks grouped by id.

    Rows within each track come out sorted by timestamp. Malformed rows are
    collected and reported; the file is rejected only when it is empty, a
    mapped header column is missing, or more than 10% of rows are bad.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.DictReader(io.StringIO(text), delimiter=desc.delimiter)
    if reader.fieldnames is None:
        raise ValidationError("empty track file")
    header = set(reader.fieldnames)
    needed = [c.source for c in desc.columns.values()]
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValidationError(f"missing header columns: {missing}")
    extras_present = [c for c in desc.extra_columns if c in header]

    cols = desc.columns
    grouped: dict[str, list[tuple[float, TrackPoint, dict]]] = {}
    rejected: list[tuple[int, str]] = []
    total = 0
    for line_no, row in enumerate(reader, start=2):
        total += 1
        try:
            track_id = (row[cols["track_id"].source] or "").strip()
            if not track_id:
                raise ValueError("empty track id")
            ts = _parse_timestamp(row[cols["timestamp"].source], cols["timestamp"].unit)
            lat = float(row[cols["latitude"].source])
            lon = float(row[cols["longitude"].source])
            alt = float(row[cols["altitude"].source])
            if cols["altitude"].unit == "feet":
                alt *= METERS_PER_FOOT
            point = TrackPoint(GeoPoint(lat, lon, alt), ts, track_id)
        except (ValueError, TypeError, ValidationError) as exc:
            rejected.append((line_no, str(exc)))
            continue
        extras = {c: row.get(c, "") for c in extras_present}
        grouped.setdefault(track_id, []).append((ts, point, extras))

    if total == 0:
        raise ValidationError("track file has no data rows")
    if len(rejected) > MAX_BAD_ROW_FRACTION * total:
        raise ValidationError(
            f"{len(rejected)} of {total} rows malformed (> {MAX_BAD_ROW_FRACTION:.0%})"
        )

    tracks = []
    for track_id in grouped:
        rows = sorted(grouped[track_id], key=lambda r: r[0])
        points = [r[1] for r in rows]
        extras = {c: [r[2][c] for r in rows] for c in extras_present}
        tracks.append(Track(track_id, points, extras))
    tracks.sort(key=lambda t: t.track_id)
    return TrackParseResult(tracks=tracks, rejected_rows=rejected)


def serialize_tracks(tracks: list[Track], desc: TrackFormatDescriptor) -> str:
    """Write tracks back to delimited text in the descriptor's format.

    With canonical units (epoch_seconds/degrees/meters) this is an exact
    inverse of parse_track_file on the position tuple.
    """
    cols = desc.columns
    header = [cols[r].source for r in REQUIRED_ROLES] + list(desc.extra_columns)
    out = io.StringIO()
    writer = csv.writer(out, delimiter=desc.delimiter, lineterminator="\n")
    writer.writerow(header)
    for track in tracks:
        for i, p in enumerate(track.points):
            if cols["timestamp"].unit == "epoch_seconds":
                ts = repr(p.timestamp_s)
            else:
                ts = datetime.fromtimestamp(p.timestamp_s, timezone.utc).isoformat()
            alt = p.geo.altitude_m
            if cols["altitude"].unit == "feet":
                alt = alt / METERS_PER_FOOT
            row = [ts, repr(p.geo.latitude_deg), repr(p.geo.longitude_deg), repr(alt), p.track_id]
            row += [str(track.extras[c][i]) if c in track.extras else "" for c in desc.extra_columns]
            writer.writerow(row)
    return out.getvalue()


def apply_filter_criteria(tracks: list[Track], criteria: FilterCriteria) -> list[Track]:
    """Keep position updates near the airport and below the AGL ceiling.

    A point survives when its great-circle distance to the airport reference
    is within radius_nm and its height above the airport elevation is at or
    below agl_ceiling_ft. Surviving points are regrouped into contiguous
    runs; runs shorter than 2 points are dropped, and a track that splits
    into several runs yields one track per run with a ``~k`` id suffix.
    """
    radius_m = criteria.radius_nm * METERS_PER_NM
    ceiling_m = criteria.agl_ceiling_ft * METERS_PER_FOOT
    ref = criteria.airport_ref

    result: list[Track] = []
    for track in tracks:
        keep = [
            haversine_distance_m(p.geo, ref) <= radius_m
            and (p.geo.altitude_m - ref.altitude_m) <= ceiling_m
            for p in track.points
        ]
        runs: list[tuple[int, int]] = []
        start = None
        for i, flag in enumerate(keep + [False]):
            if flag and start is None:
                start = i
            elif not flag and start is not None:
                if i - start >= 2:
                    runs.append((start, i))
                start = None
        if not runs:
            continue
        if len(runs) == 1:
            s, e = runs[0]
            result.append(track.slice(s, e))
        else:
            for k, (s, e) in enumerate(runs, start=1):
                result.append(track.slice(s, e, track_id=f"{track.track_id}~{k}"))
    return result


def ingest_external_annotations(
    rows: list[tuple[str, str]],
    desc: AnnotationIngestDescriptor,
    known_subjects: set[str] | None = None,
) -> AnnotationIngestResult:
    """Convert (subject_id, label) rows into unverified model pre-labels.

    Rows with labels outside the descriptor, or referencing subjects not in
    ``known_subjects`` (when given), are reported individually; the batch
    continues.
    """
    records: list[ExternalAnnotation] = []
    errors: list[tuple[int, str]] = []
    for idx, (subject, label) in enumerate(rows):
        if label not in desc.labels:
            errors.append((idx, f"unknown label {label!r}"))
            continue
        if known_subjects is not None and subject not in known_subjects:
            errors.append((idx, f"unknown subject {subject!r}"))
            continue
        records.append(
            ExternalAnnotation(
                subject=subject, label=label, annotator_name=desc.annotator_name
            )
        )
    return AnnotationIngestResult(records=records, errors=errors)


def split_dataset(track_ids: list[str], n_sets: int, seed: int) -> list[list[str]]:
    """Seeded shuffle then round-robin partition into n_sets disjoint lists.

    Set sizes differ by at most one; the union is exactly the input.
    """
    if n_sets < 2:
        raise ValidationError("n_sets must be at least 2")
    if not track_ids:
        raise ValidationError("no track ids to split")
    if n_sets > len(track_ids):
        raise ValidationError(
            f"cannot split {len(track_ids)} tracks into {n_sets} sets"
        )
    shuffled = list(track_ids)
    random.Random(seed).shuffle(shuffled)
    sets: list[list[str]] = [[] for _ in range(n_sets)]
    for i, track_id in enumerate(shuffled):
        sets[i % n_sets].append(track_id)
    return sets
