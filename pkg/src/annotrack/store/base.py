"""Storage semantics shared by every backend.

The public contract (replacement semantics, human supersession of model
pre-labels, meta maintenance, query conjunction, atomic batches, the
operation log) is implemented once here over a small set of primitive
accessors; backends supply the primitives plus a transaction scope.

Label lifecycle: each (subject, annotator) pair holds at most one current
annotation; re-annotating replaces it and retires the old record to the
audit history. A human annotation additionally retires any current model
pre-labels on the same subject, which is what turns "verify" work into
plain annotate/batch-annotate calls.
"""
from __future__ import annotations

import contextlib
import csv
import io
import json
import threading
from abc import ABC, abstractmethod
from collections import defaultdict

from ..errors import NotFoundError, ValidationError, WorkflowLockError
from ..geo import Track
from ..ingest import ExternalAnnotation, LabelSetDescriptor
from .types import (
    EXPORT_HEADER,
    AnnotationRecord,
    AnnotatorRecord,
    OpLogEntry,
    Project,
    Query,
    RunwayRecord,
    SegmentRecord,
    TrackDetail,
    TrackMeta,
    annotator_matches,
    utc_now_iso,
)


class Store(ABC):
    """Abstract annotation store; see MemoryStore and SqlStore."""

    def __init__(self):
        self._write_locks: dict[str, threading.RLock] = defaultdict(threading.RLock)

    # -- primitives supplied by backends ------------------------------------

    @abstractmethod
    def _next_id(self, kind: str) -> int: ...

    @abstractmethod
    def _put_project(self, project: Project): ...

    @abstractmethod
    def _find_project(self, name: str) -> Project | None: ...

    @abstractmethod
    def _get_project_record(self, project_id: str) -> Project | None: ...

    @abstractmethod
    def _list_projects(self) -> list[Project]: ...

    @abstractmethod
    def _put_track(self, project_id: str, track: Track): ...

    @abstractmethod
    def _get_track_record(self, project_id: str, track_id: str) -> Track | None: ...

    @abstractmethod
    def _track_ids(self, project_id: str) -> list[str]: ...

    @abstractmethod
    def _track_spans(self, project_id: str) -> dict[str, tuple[float, float]]: ...

    @abstractmethod
    def _put_segments(self, project_id: str, segments: list[SegmentRecord]): ...

    @abstractmethod
    def _delete_segments(self, project_id: str, track_id: str | None = None): ...

    @abstractmethod
    def _segments(self, project_id: str) -> list[SegmentRecord]: ...

    @abstractmethod
    def _get_segment(self, project_id: str, segment_id: str) -> SegmentRecord | None: ...

    @abstractmethod
    def _set_segment_sets(self, project_id: str, assignment: dict[str, int]): ...

    @abstractmethod
    def _put_runways(self, project_id: str, runways: list[RunwayRecord]): ...

    @abstractmethod
    def _runways(self, project_id: str) -> list[RunwayRecord]: ...

    @abstractmethod
    def _put_annotator(self, record: AnnotatorRecord): ...

    @abstractmethod
    def _annotators(self) -> list[AnnotatorRecord]: ...

    @abstractmethod
    def _current_annotations(self, project_id: str) -> list[AnnotationRecord]: ...

    @abstractmethod
    def _annotations_for_subject(self, project_id: str, subject: str) -> list[AnnotationRecord]: ...

    @abstractmethod
    def _segment_ids_for_track(self, project_id: str, track_id: str) -> set[str]: ...

    @abstractmethod
    def _set_annotation(self, project_id: str, record: AnnotationRecord): ...

    @abstractmethod
    def _remove_annotation(self, project_id: str, subject: str, annotator_id: str): ...

    @abstractmethod
    def _append_history(self, project_id: str, record: AnnotationRecord, superseded_at: str): ...

    @abstractmethod
    def _meta_counts(self, project_id: str) -> dict[str, int]: ...

    @abstractmethod
    def _set_meta_count(self, project_id: str, track_id: str, count: int): ...

    @abstractmethod
    def _append_oplog(self, project_id: str, entry: OpLogEntry): ...

    @abstractmethod
    def _oplog_entries(self, project_id: str) -> list[OpLogEntry]: ...

    @abstractmethod
    def _put_model(self, project_id: str, name: str, payload: dict): ...

    @abstractmethod
    def _get_model_payload(self, project_id: str, name: str) -> dict | None: ...

    @abstractmethod
    def _model_names(self, project_id: str) -> list[str]: ...

    @abstractmethod
    def _put_report(self, project_id: str, model_name: str, set_index: int, report: dict): ...

    @abstractmethod
    def _get_report(self, project_id: str, model_name: str, set_index: int) -> dict | None: ...

    @abstractmethod
    def _get_lock_owner(self, project_id: str) -> str | None: ...

    @abstractmethod
    def _set_lock_owner(self, project_id: str, owner: str | None): ...

    @abstractmethod
    def _txn(self): ...

    def flush(self):
        """Persist pending state; a no-op for backends that write through."""

    def close(self):
        self.flush()

    # -- projects ------------------------------------------------------------

    def create_project(self, name: str, label_set: LabelSetDescriptor,
                       config: dict | None = None) -> Project:
        if not name:
            raise ValidationError("project name required")
        if self._find_project(name) is not None:
            raise ValidationError(f"project {name!r} already exists")
        project = Project(
            id=f"p{self._next_id('project')}",
            name=name,
            label_set=label_set,
            created_at=utc_now_iso(),
            config=dict(config or {}),
        )
        self._put_project(project)
        return project

    def get_project(self, name_or_id: str) -> Project:
        project = self._find_project(name_or_id) or self._get_project_record(name_or_id)
        if project is None:
            raise NotFoundError(f"unknown project: {name_or_id!r}")
        return project

    def list_projects(self) -> list[Project]:
        return sorted(self._list_projects(), key=lambda p: p.name)

    def update_project_config(self, project_id: str, config: dict):
        project = self.get_project(project_id)
        merged = dict(project.config)
        merged.update(config)
        self._put_project(Project(project.id, project.name, project.label_set,
                                  project.created_at, merged))

    # -- tracks ----------------------------------------------------------------

    def upsert_tracks(self, project_id: str, tracks: list[Track]) -> int:
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            for track in tracks:
                if len(track.points) < 2:
                    raise ValidationError(
                        f"track {track.track_id!r} needs at least 2 points"
                    )
                if self._segment_ids_for_track(project.id, track.track_id):
                    self._retire_segment_annotations(project.id, track.track_id)
                    self._delete_segments(project.id, track_id=track.track_id)
                self._put_track(project.id, track)
                self._recount_annotations(project.id, track.track_id)
            return len(tracks)

    def _retire_segment_annotations(self, project_id: str, track_id: str):
        seg_ids = self._segment_ids_for_track(project_id, track_id)
        if not seg_ids:
            return
        now = utc_now_iso()
        for sid in sorted(seg_ids):
            for record in self._annotations_for_subject(project_id, sid):
                self._remove_annotation(project_id, record.subject, record.annotator_id)
                self._append_history(project_id, record, now)

    def get_track(self, project_id: str, subject_id: str) -> TrackDetail:
        project = self.get_project(project_id)
        track = self._get_track_record(project.id, subject_id)
        segment = None
        if track is None:
            segment = self._get_segment(project.id, subject_id)
            if segment is None:
                raise NotFoundError(f"unknown track or segment: {subject_id!r}")
            parent = self._get_track_record(project.id, segment.track_id)
            if parent is None:
                raise NotFoundError(f"segment {subject_id!r} has no parent track")
            track = parent.slice(segment.start_idx, segment.end_idx,
                                 track_id=subject_id)
        annotations = sorted(
            self._annotations_for_subject(project.id, subject_id),
            key=lambda r: r.id,
        )
        counts = self._meta_counts(project.id)
        if segment is None:
            num = counts.get(subject_id, 0)
        else:
            num = len(annotations)
        meta = TrackMeta(
            track_id=subject_id,
            project_id=project.id,
            num_points=len(track.points),
            start_time=track.start_time,
            end_time=track.end_time,
            num_annotations=num,
        )
        return TrackDetail(track=track, meta=meta, annotations=annotations,
                           segment=segment)

    def track_ids(self, project_id: str) -> list[str]:
        project = self.get_project(project_id)
        return sorted(self._track_ids(project.id))

    def tracks(self, project_id: str) -> list[Track]:
        project = self.get_project(project_id)
        out = [self._get_track_record(project.id, tid)
               for tid in sorted(self._track_ids(project.id))]
        return [t for t in out if t is not None]

    # -- pipeline artifacts ------------------------------------------------------

    def replace_runways(self, project_id: str, runways: list[RunwayRecord]):
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            self._put_runways(project.id, runways)

    def runways(self, project_id: str) -> list[RunwayRecord]:
        project = self.get_project(project_id)
        return sorted(self._runways(project.id), key=lambda r: r.runway_id)

    def replace_segments(self, project_id: str, segments: list[SegmentRecord]):
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            known = set(self._track_ids(project.id))
            for seg in segments:
                if seg.track_id not in known:
                    raise NotFoundError(f"segment for unknown track {seg.track_id!r}")
            now = utc_now_iso()
            seg_ids = {s.segment_id for s in self._segments(project.id)}
            for record in self._current_annotations(project.id):
                if record.subject in seg_ids:
                    self._remove_annotation(project.id, record.subject,
                                            record.annotator_id)
                    self._append_history(project.id, record, now)
            self._delete_segments(project.id)
            self._put_segments(project.id, segments)
            for tid in known:
                self._recount_annotations(project.id, tid)

    def segments(self, project_id: str, set_index: int | None = None) -> list[SegmentRecord]:
        project = self.get_project(project_id)
        segs = self._segments(project.id)
        if set_index is not None:
            segs = [s for s in segs if s.set_index == set_index]
        return sorted(segs, key=lambda s: s.segment_id)

    def assign_sets(self, project_id: str, assignment: dict[str, int]):
        project = self.get_project(project_id)
        known = {s.segment_id for s in self._segments(project.id)}
        unknown = set(assignment) - known
        if unknown:
            raise NotFoundError(f"unknown segments in split: {sorted(unknown)[:3]}")
        with self._write_locks[project.id], self._txn():
            self._set_segment_sets(project.id, assignment)

    # -- annotators ----------------------------------------------------------------

    def register_annotator(self, kind: str, name: str, iteration: str | None = None,
                           role: str | None = None) -> AnnotatorRecord:
        existing = self.find_annotator(name, iteration, kind=kind)
        if existing is not None:
            return existing
        record = AnnotatorRecord(
            id=f"an{self._next_id('annotator')}",
            kind=kind, name=name, iteration=iteration, role=role,
        )
        self._put_annotator(record)
        return record

    def find_annotator(self, name: str, iteration: str | None = None,
                       kind: str | None = None) -> AnnotatorRecord | None:
        for record in self._annotators():
            if record.name == name and record.iteration == iteration:
                if kind is None or record.kind == kind:
                    return record
        return None

    def get_annotator(self, annotator_id: str) -> AnnotatorRecord:
        for record in self._annotators():
            if record.id == annotator_id:
                return record
        raise NotFoundError(f"unknown annotator: {annotator_id!r}")

    def resolve_annotator(self, display: str) -> AnnotatorRecord:
        """Look up by display name: 'name:iteration' for models, bare name otherwise."""
        if ":" in display:
            name, iteration = display.split(":", 1)
            record = self.find_annotator(name, iteration)
        else:
            record = self.find_annotator(display, None)
        if record is None:
            raise NotFoundError(f"unknown annotator: {display!r}")
        return record

    # -- annotation ------------------------------------------------------------------

    def _subject_exists(self, project_id: str, subject: str) -> bool:
        return (
            self._get_track_record(project_id, subject) is not None
            or self._get_segment(project_id, subject) is not None
        )

    def _parent_track(self, project_id: str, subject: str) -> str | None:
        if self._get_track_record(project_id, subject) is not None:
            return subject
        segment = self._get_segment(project_id, subject)
        return segment.track_id if segment else None

    def _recount_annotations(self, project_id: str, track_id: str):
        count = len(self._annotations_for_subject(project_id, track_id))
        for sid in self._segment_ids_for_track(project_id, track_id):
            count += len(self._annotations_for_subject(project_id, sid))
        self._set_meta_count(project_id, track_id, count)

    def _apply_annotation(self, project: Project, subject: str, label: str,
                          annotator: AnnotatorRecord) -> AnnotationRecord:
        if label not in project.labels:
            raise ValidationError(
                f"label {label!r} not in project label set {project.labels}"
            )
        if not self._subject_exists(project.id, subject):
            raise NotFoundError(f"unknown subject: {subject!r}")
        now = utc_now_iso()
        current = self._annotations_for_subject(project.id, subject)
        for record in current:
            replaced = record.annotator_id == annotator.id
            superseded = (
                annotator.kind == "human"
                and self.get_annotator(record.annotator_id).kind == "model"
            )
            if replaced or superseded:
                self._remove_annotation(project.id, subject, record.annotator_id)
                self._append_history(project.id, record, now)
        record = AnnotationRecord(
            id=f"a{self._next_id('annotation')}",
            subject=subject,
            label=label,
            annotator_id=annotator.id,
            verified=annotator.kind == "human",
            created_at=now,
        )
        self._set_annotation(project.id, record)
        parent = self._parent_track(project.id, subject)
        if parent is not None:
            self._recount_annotations(project.id, parent)
        return record

    def annotate(self, project_id: str, subject: str, label: str,
                 annotator: AnnotatorRecord | str) -> AnnotationRecord:
        project = self.get_project(project_id)
        if isinstance(annotator, str):
            annotator = self.resolve_annotator(annotator)
        else:
            self.get_annotator(annotator.id)
        with self._write_locks[project.id], self._txn():
            record = self._apply_annotation(project, subject, label, annotator)
            self._append_oplog(project.id, OpLogEntry(
                seq=self._next_id("op"),
                kind="single",
                annotator_id=annotator.id,
                annotator_kind=annotator.kind,
                annotator_display=annotator.display_name,
                subjects=(subject,),
                label=label,
                created_at=record.created_at,
            ))
            return record

    def batch_annotate(self, project_id: str, query: Query, label: str,
                       annotator: AnnotatorRecord | str) -> int:
        project = self.get_project(project_id)
        if isinstance(annotator, str):
            annotator = self.resolve_annotator(annotator)
        else:
            self.get_annotator(annotator.id)
        with self._write_locks[project.id]:
            subjects = self.query_tracks(project.id, query)
            if not subjects:
                return 0
            with self._txn():
                for subject in subjects:
                    self._apply_annotation(project, subject, label, annotator)
                self._append_oplog(project.id, OpLogEntry(
                    seq=self._next_id("op"),
                    kind="batch",
                    annotator_id=annotator.id,
                    annotator_kind=annotator.kind,
                    annotator_display=annotator.display_name,
                    subjects=tuple(subjects),
                    label=label,
                    created_at=utc_now_iso(),
                ))
            return len(subjects)

    def ingest_annotations(self, project_id: str,
                           records: list[ExternalAnnotation]) -> tuple[int, list[tuple[int, str]]]:
        """Apply external pre-labels; per-row errors are reported, not fatal."""
        project = self.get_project(project_id)
        applied_by: dict[str, list[str]] = defaultdict(list)
        errors: list[tuple[int, str]] = []
        annotators: dict[str, AnnotatorRecord] = {}
        with self._write_locks[project.id], self._txn():
            for idx, rec in enumerate(records):
                name = rec.annotator_name
                if name not in annotators:
                    if ":" not in name:
                        errors.append((idx, f"bad model annotator name {name!r}"))
                        continue
                    base, iteration = name.split(":", 1)
                    annotators[name] = self.register_annotator(
                        "model", base, iteration=iteration
                    )
                annotator = annotators[name]
                try:
                    self._apply_annotation(project, rec.subject, rec.label, annotator)
                except (NotFoundError, ValidationError) as exc:
                    errors.append((idx, str(exc)))
                    continue
                applied_by[name].append(rec.subject)
            for name, subjects in applied_by.items():
                annotator = annotators[name]
                self._append_oplog(project.id, OpLogEntry(
                    seq=self._next_id("op"),
                    kind="ingest",
                    annotator_id=annotator.id,
                    annotator_kind=annotator.kind,
                    annotator_display=annotator.display_name,
                    subjects=tuple(subjects),
                    label=None,
                    created_at=utc_now_iso(),
                ))
        return sum(len(v) for v in applied_by.values()), errors

    # -- queries -------------------------------------------------------------------

    def _subject_geometry(self, project_id: str, subject: str) -> Track | None:
        track = self._get_track_record(project_id, subject)
        if track is not None:
            return track
        segment = self._get_segment(project_id, subject)
        if segment is None:
            return None
        parent = self._get_track_record(project_id, segment.track_id)
        if parent is None:
            return None
        return parent.slice(segment.start_idx, segment.end_idx, track_id=subject)

    def query_tracks(self, project_id: str, query: Query) -> list[str]:
        """Subject ids satisfying the conjunction of all present filters.

        Unknown labels or annotator names yield an empty result, not an
        error. Results are ordered by subject id, then paginated.
        """
        project = self.get_project(project_id)
        segments = {s.segment_id: s for s in self._segments(project.id)}
        track_meta = self._track_spans(project.id)

        by_subject: dict[str, list[AnnotationRecord]] = defaultdict(list)
        if query.has_annotation_filter:
            annotator_by_id = {a.id: a for a in self._annotators()}
            for record in self._current_annotations(project.id):
                by_subject[record.subject].append(record)

        def annotation_ok(subject: str) -> bool:
            if not query.has_annotation_filter:
                return True
            for record in by_subject.get(subject, ()):
                if query.label is not None and record.label != query.label:
                    continue
                if query.verified is not None and record.verified != query.verified:
                    continue
                if query.annotator is not None:
                    annotator = annotator_by_id.get(record.annotator_id)
                    if annotator is None or not annotator_matches(annotator, query.annotator):
                        continue
                return True
            return False

        result = []
        for subject in sorted(set(track_meta) | set(segments)):
            segment = segments.get(subject)
            if query.runway_id is not None:
                if segment is None or segment.runway_id != query.runway_id:
                    continue
            if query.set_index is not None:
                if segment is None or segment.set_index != query.set_index:
                    continue
            if query.time_range is not None:
                t0, t1 = query.time_range
                if segment is not None:
                    s, e = segment.start_time, segment.end_time
                else:
                    s, e = track_meta[subject]
                if e < t0 or s > t1:
                    continue
            if not annotation_ok(subject):
                continue
            if query.bbox is not None:
                geometry = self._subject_geometry(project.id, subject)
                if geometry is None or not _any_point_in_bbox(geometry, query.bbox):
                    continue
            result.append(subject)

        start = query.offset
        end = None if query.limit is None else start + query.limit
        return result[start:end]

    def annotations(self, project_id: str, subject: str | None = None) -> list[AnnotationRecord]:
        project = self.get_project(project_id)
        if subject is not None:
            records = self._annotations_for_subject(project.id, subject)
        else:
            records = self._current_annotations(project.id)
        return sorted(records, key=lambda r: (r.subject, r.id))

    def export_annotations(self, project_id: str, format: str = "csv") -> bytes:
        project = self.get_project(project_id)
        annotator_by_id = {a.id: a for a in self._annotators()}
        rows = []
        for record in self._current_annotations(project.id):
            annotator = annotator_by_id[record.annotator_id]
            rows.append({
                "subject_id": record.subject,
                "label": record.label,
                "annotator_name": annotator.name,
                "annotator_iteration": annotator.iteration or "",
                "annotator_kind": annotator.kind,
                "verified": record.verified,
                "created_at": record.created_at,
            })
        rows.sort(key=lambda r: (r["subject_id"], r["annotator_name"],
                                 r["annotator_iteration"]))
        if format == "json":
            return json.dumps(rows, indent=2).encode()
        if format != "csv":
            raise ValidationError(f"unknown export format: {format!r}")
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(EXPORT_HEADER.split(","))
        for row in rows:
            writer.writerow([
                row["subject_id"], row["label"], row["annotator_name"],
                row["annotator_iteration"], row["annotator_kind"],
                "true" if row["verified"] else "false", row["created_at"],
            ])
        return out.getvalue().encode()

    # -- models / reports -------------------------------------------------------

    def save_model(self, project_id: str, name: str, payload: dict):
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            self._put_model(project.id, name, payload)

    def get_model(self, project_id: str, name: str) -> dict:
        project = self.get_project(project_id)
        payload = self._get_model_payload(project.id, name)
        if payload is None:
            raise NotFoundError(f"unknown model: {name!r}")
        return payload

    def list_models(self, project_id: str) -> list[str]:
        project = self.get_project(project_id)
        return sorted(self._model_names(project.id))

    def save_eval_report(self, project_id: str, model_name: str, set_index: int,
                         report: dict):
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            self._put_report(project.id, model_name, set_index, report)

    def get_eval_report(self, project_id: str, model_name: str, set_index: int) -> dict:
        project = self.get_project(project_id)
        report = self._get_report(project.id, model_name, set_index)
        if report is None:
            raise NotFoundError(
                f"no evaluation of {model_name!r} on set {set_index}"
            )
        return report

    # -- op log / workflow lock ----------------------------------------------------

    def operation_log(self, project_id: str) -> list[OpLogEntry]:
        project = self.get_project(project_id)
        return sorted(self._oplog_entries(project.id), key=lambda e: e.seq)

    @contextlib.contextmanager
    def workflow_lock(self, project_id: str, owner: str = "workflow"):
        self.acquire_workflow_lock(project_id, owner)
        try:
            yield
        finally:
            self.release_workflow_lock(project_id, owner)

    def acquire_workflow_lock(self, project_id: str, owner: str):
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            holder = self._get_lock_owner(project.id)
            if holder is not None and holder != owner:
                raise WorkflowLockError(
                    f"workflow lock held by {holder!r} for project {project.name!r}"
                )
            self._set_lock_owner(project.id, owner)

    def release_workflow_lock(self, project_id: str, owner: str):
        project = self.get_project(project_id)
        with self._write_locks[project.id], self._txn():
            holder = self._get_lock_owner(project.id)
            if holder == owner:
                self._set_lock_owner(project.id, None)

    def workflow_lock_owner(self, project_id: str) -> str | None:
        project = self.get_project(project_id)
        return self._get_lock_owner(project.id)


def _any_point_in_bbox(track: Track, bbox: tuple[float, float, float, float]) -> bool:
    min_lat, min_lon, max_lat, max_lon = bbox
    return any(
        min_lat <= p.geo.latitude_deg <= max_lat
        and min_lon <= p.geo.longitude_deg <= max_lon
        for p in track.points
    )
