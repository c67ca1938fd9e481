"""Relational store backend (SQLAlchemy Core; SQLite by default).

Implements the same primitive contract as MemoryStore over normalized
tables, with batch atomicity provided by real database transactions.
Point geometry is stored as a JSON column per track: the service always
reads positions whole-track, never point-by-point.
"""
from __future__ import annotations

import contextlib
import threading

import sqlalchemy as sa

from ..ingest import LabelSetDescriptor
from .base import Store
from .memory import _seg_from_json, _seg_to_json, _track_from_json, _track_to_json
from .types import (
    AnnotationRecord,
    AnnotatorRecord,
    OpLogEntry,
    Project,
    RunwayRecord,
    SegmentRecord,
)

_metadata = sa.MetaData()

_counters = sa.Table(
    "counters", _metadata,
    sa.Column("name", sa.String, primary_key=True),
    sa.Column("value", sa.Integer, nullable=False),
)
_projects = sa.Table(
    "projects", _metadata,
    sa.Column("id", sa.String, primary_key=True),
    sa.Column("name", sa.String, unique=True, nullable=False),
    sa.Column("label_project", sa.String, nullable=False),
    sa.Column("labels", sa.JSON, nullable=False),
    sa.Column("config", sa.JSON, nullable=False),
    sa.Column("created_at", sa.String, nullable=False),
)
_tracks = sa.Table(
    "tracks", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("track_id", sa.String, primary_key=True),
    sa.Column("doc", sa.JSON, nullable=False),
    sa.Column("start_time", sa.Float, nullable=False, default=0.0),
    sa.Column("end_time", sa.Float, nullable=False, default=0.0),
    sa.Column("num_annotations", sa.Integer, nullable=False, default=0),
)
_segments = sa.Table(
    "segments", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("segment_id", sa.String, primary_key=True),
    sa.Column("track_id", sa.String, nullable=False),
    sa.Column("doc", sa.JSON, nullable=False),
)
_runways = sa.Table(
    "runways", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("runway_id", sa.String, primary_key=True),
    sa.Column("doc", sa.JSON, nullable=False),
)
_annotators = sa.Table(
    "annotators", _metadata,
    sa.Column("id", sa.String, primary_key=True),
    sa.Column("kind", sa.String, nullable=False),
    sa.Column("name", sa.String, nullable=False),
    sa.Column("iteration", sa.String),
    sa.Column("role", sa.String),
)
_annotations = sa.Table(
    "annotations", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("subject_id", sa.String, primary_key=True),
    sa.Column("annotator_id", sa.String, primary_key=True),
    sa.Column("id", sa.String, nullable=False),
    sa.Column("label", sa.String, nullable=False),
    sa.Column("verified", sa.Boolean, nullable=False),
    sa.Column("created_at", sa.String, nullable=False),
)
_history = sa.Table(
    "annotation_history", _metadata,
    sa.Column("pk", sa.Integer, primary_key=True, autoincrement=True),
    sa.Column("project_id", sa.String, nullable=False),
    sa.Column("doc", sa.JSON, nullable=False),
    sa.Column("superseded_at", sa.String, nullable=False),
)
_oplog = sa.Table(
    "oplog", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("seq", sa.Integer, primary_key=True),
    sa.Column("doc", sa.JSON, nullable=False),
)
_models = sa.Table(
    "models", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("name", sa.String, primary_key=True),
    sa.Column("payload", sa.JSON, nullable=False),
)
_reports = sa.Table(
    "eval_reports", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("model_name", sa.String, primary_key=True),
    sa.Column("set_index", sa.Integer, primary_key=True),
    sa.Column("report", sa.JSON, nullable=False),
)
_locks = sa.Table(
    "workflow_locks", _metadata,
    sa.Column("project_id", sa.String, primary_key=True),
    sa.Column("owner", sa.String, nullable=False),
)


class SqlStore(Store):
    def __init__(self, url: str = "sqlite://"):
        super().__init__()
        connect_args = {}
        if url.startswith("sqlite"):
            connect_args["check_same_thread"] = False
        self._engine = sa.create_engine(
            url, connect_args=connect_args, poolclass=sa.pool.StaticPool
        )
        _metadata.create_all(self._engine)
        self._conn = self._engine.connect()
        self._sql_lock = threading.RLock()
        self._txn_depth = 0

    def close(self):
        self._conn.close()
        self._engine.dispose()

    @contextlib.contextmanager
    def _txn(self):
        with self._sql_lock:
            if self._txn_depth > 0:
                yield
                return
            self._txn_depth += 1
            try:
                yield
            except BaseException:
                self._txn_depth -= 1
                self._conn.rollback()
                raise
            self._txn_depth -= 1
            self._conn.commit()

    def _exec(self, stmt, commit: bool = True):
        with self._sql_lock:
            result = self._conn.execute(stmt)
            if commit and self._txn_depth == 0:
                self._conn.commit()
            return result

    def _rows(self, stmt):
        with self._sql_lock:
            return self._conn.execute(stmt).fetchall()

    # -- primitives --------------------------------------------------------------

    def _next_id(self, kind: str) -> int:
        with self._sql_lock:
            row = self._rows(sa.select(_counters.c.value).where(_counters.c.name == kind))
            if row:
                value = row[0][0] + 1
                self._exec(
                    _counters.update().where(_counters.c.name == kind).values(value=value)
                )
            else:
                value = 1
                self._exec(_counters.insert().values(name=kind, value=value))
            return value

    def _put_project(self, project: Project):
        values = {
            "name": project.name,
            "label_project": project.label_set.project_name,
            "labels": list(project.label_set.labels),
            "config": project.config,
            "created_at": project.created_at,
        }
        existing = self._rows(sa.select(_projects.c.id).where(_projects.c.id == project.id))
        if existing:
            self._exec(_projects.update().where(_projects.c.id == project.id).values(**values))
        else:
            self._exec(_projects.insert().values(id=project.id, **values))

    def _project_from_row(self, row) -> Project:
        return Project(
            id=row.id,
            name=row.name,
            label_set=LabelSetDescriptor(
                project_name=row.label_project, labels=tuple(row.labels)
            ),
            created_at=row.created_at,
            config=dict(row.config),
        )

    def _find_project(self, name: str):
        rows = self._rows(sa.select(_projects).where(_projects.c.name == name))
        return self._project_from_row(rows[0]) if rows else None

    def _get_project_record(self, project_id: str):
        rows = self._rows(sa.select(_projects).where(_projects.c.id == project_id))
        return self._project_from_row(rows[0]) if rows else None

    def _list_projects(self):
        return [self._project_from_row(r) for r in self._rows(sa.select(_projects))]

    def _put_track(self, project_id: str, track):
        doc = _track_to_json(track)
        spans = {"start_time": track.start_time, "end_time": track.end_time}
        where = sa.and_(
            _tracks.c.project_id == project_id, _tracks.c.track_id == track.track_id
        )
        if self._rows(sa.select(_tracks.c.track_id).where(where)):
            self._exec(_tracks.update().where(where).values(doc=doc, **spans))
        else:
            self._exec(_tracks.insert().values(
                project_id=project_id, track_id=track.track_id, doc=doc,
                num_annotations=0, **spans,
            ))

    def _get_track_record(self, project_id: str, track_id: str):
        rows = self._rows(sa.select(_tracks.c.doc).where(sa.and_(
            _tracks.c.project_id == project_id, _tracks.c.track_id == track_id
        )))
        return _track_from_json(rows[0][0]) if rows else None

    def _track_ids(self, project_id: str):
        rows = self._rows(
            sa.select(_tracks.c.track_id).where(_tracks.c.project_id == project_id)
        )
        return [r[0] for r in rows]

    def _track_spans(self, project_id: str):
        rows = self._rows(sa.select(
            _tracks.c.track_id, _tracks.c.start_time, _tracks.c.end_time
        ).where(_tracks.c.project_id == project_id))
        return {r.track_id: (r.start_time, r.end_time) for r in rows}

    def _put_segments(self, project_id: str, segments: list[SegmentRecord]):
        for seg in segments:
            self._exec(_segments.insert().values(
                project_id=project_id,
                segment_id=seg.segment_id,
                track_id=seg.track_id,
                doc=_seg_to_json(seg),
            ))

    def _delete_segments(self, project_id: str, track_id: str | None = None):
        stmt = _segments.delete().where(_segments.c.project_id == project_id)
        if track_id is not None:
            stmt = stmt.where(_segments.c.track_id == track_id)
        self._exec(stmt)

    def _segments(self, project_id: str):
        rows = self._rows(
            sa.select(_segments.c.doc).where(_segments.c.project_id == project_id)
        )
        return [_seg_from_json(r[0]) for r in rows]

    def _get_segment(self, project_id: str, segment_id: str):
        rows = self._rows(sa.select(_segments.c.doc).where(sa.and_(
            _segments.c.project_id == project_id,
            _segments.c.segment_id == segment_id,
        )))
        return _seg_from_json(rows[0][0]) if rows else None

    def _set_segment_sets(self, project_id: str, assignment: dict[str, int]):
        for segment_id, set_index in assignment.items():
            seg = self._get_segment(project_id, segment_id)
            doc = _seg_to_json(seg)
            doc["set_index"] = set_index
            self._exec(_segments.update().where(sa.and_(
                _segments.c.project_id == project_id,
                _segments.c.segment_id == segment_id,
            )).values(doc=doc))

    def _put_runways(self, project_id: str, runways: list[RunwayRecord]):
        self._exec(_runways.delete().where(_runways.c.project_id == project_id))
        for rwy in runways:
            self._exec(_runways.insert().values(
                project_id=project_id, runway_id=rwy.runway_id, doc=rwy.__dict__
            ))

    def _runways(self, project_id: str):
        rows = self._rows(
            sa.select(_runways.c.doc).where(_runways.c.project_id == project_id)
        )
        return [RunwayRecord(**r[0]) for r in rows]

    def _put_annotator(self, record: AnnotatorRecord):
        self._exec(_annotators.insert().values(**record.__dict__))

    def _annotators(self):
        return [AnnotatorRecord(**row._mapping) for row in self._rows(sa.select(_annotators))]

    @staticmethod
    def _record_from_row(r) -> AnnotationRecord:
        return AnnotationRecord(
            id=r.id, subject=r.subject_id, label=r.label,
            annotator_id=r.annotator_id, verified=r.verified,
            created_at=r.created_at,
        )

    def _current_annotations(self, project_id: str):
        rows = self._rows(
            sa.select(_annotations).where(_annotations.c.project_id == project_id)
        )
        return [self._record_from_row(r) for r in rows]

    def _annotations_for_subject(self, project_id: str, subject: str):
        rows = self._rows(sa.select(_annotations).where(sa.and_(
            _annotations.c.project_id == project_id,
            _annotations.c.subject_id == subject,
        )))
        return [self._record_from_row(r) for r in rows]

    def _segment_ids_for_track(self, project_id: str, track_id: str):
        rows = self._rows(sa.select(_segments.c.segment_id).where(sa.and_(
            _segments.c.project_id == project_id,
            _segments.c.track_id == track_id,
        )))
        return {r[0] for r in rows}

    def _set_annotation(self, project_id: str, record: AnnotationRecord):
        where = sa.and_(
            _annotations.c.project_id == project_id,
            _annotations.c.subject_id == record.subject,
            _annotations.c.annotator_id == record.annotator_id,
        )
        values = {
            "id": record.id, "label": record.label,
            "verified": record.verified, "created_at": record.created_at,
        }
        if self._rows(sa.select(_annotations.c.id).where(where)):
            self._exec(_annotations.update().where(where).values(**values))
        else:
            self._exec(_annotations.insert().values(
                project_id=project_id, subject_id=record.subject,
                annotator_id=record.annotator_id, **values,
            ))

    def _remove_annotation(self, project_id: str, subject: str, annotator_id: str):
        self._exec(_annotations.delete().where(sa.and_(
            _annotations.c.project_id == project_id,
            _annotations.c.subject_id == subject,
            _annotations.c.annotator_id == annotator_id,
        )))

    def _append_history(self, project_id: str, record: AnnotationRecord, superseded_at: str):
        self._exec(_history.insert().values(
            project_id=project_id, doc=record.__dict__, superseded_at=superseded_at
        ))

    def _meta_counts(self, project_id: str):
        rows = self._rows(sa.select(
            _tracks.c.track_id, _tracks.c.num_annotations
        ).where(_tracks.c.project_id == project_id))
        return {r.track_id: r.num_annotations for r in rows}

    def _set_meta_count(self, project_id: str, track_id: str, count: int):
        self._exec(_tracks.update().where(sa.and_(
            _tracks.c.project_id == project_id, _tracks.c.track_id == track_id
        )).values(num_annotations=count))

    def _append_oplog(self, project_id: str, entry: OpLogEntry):
        doc = dict(entry.__dict__)
        doc["subjects"] = list(entry.subjects)
        self._exec(_oplog.insert().values(
            project_id=project_id, seq=entry.seq, doc=doc
        ))

    def _oplog_entries(self, project_id: str):
        rows = self._rows(
            sa.select(_oplog.c.doc).where(_oplog.c.project_id == project_id)
        )
        out = []
        for (doc,) in rows:
            doc = dict(doc)
            doc["subjects"] = tuple(doc["subjects"])
            out.append(OpLogEntry(**doc))
        return out

    def _put_model(self, project_id: str, name: str, payload: dict):
        where = sa.and_(
            _models.c.project_id == project_id, _models.c.name == name
        )
        if self._rows(sa.select(_models.c.name).where(where)):
            self._exec(_models.update().where(where).values(payload=payload))
        else:
            self._exec(_models.insert().values(
                project_id=project_id, name=name, payload=payload
            ))

    def _get_model_payload(self, project_id: str, name: str):
        rows = self._rows(sa.select(_models.c.payload).where(sa.and_(
            _models.c.project_id == project_id, _models.c.name == name
        )))
        return rows[0][0] if rows else None

    def _model_names(self, project_id: str):
        rows = self._rows(
            sa.select(_models.c.name).where(_models.c.project_id == project_id)
        )
        return [r[0] for r in rows]

    def _put_report(self, project_id: str, model_name: str, set_index: int, report: dict):
        where = sa.and_(
            _reports.c.project_id == project_id,
            _reports.c.model_name == model_name,
            _reports.c.set_index == set_index,
        )
        if self._rows(sa.select(_reports.c.set_index).where(where)):
            self._exec(_reports.update().where(where).values(report=report))
        else:
            self._exec(_reports.insert().values(
                project_id=project_id, model_name=model_name,
                set_index=set_index, report=report,
            ))

    def _get_report(self, project_id: str, model_name: str, set_index: int):
        rows = self._rows(sa.select(_reports.c.report).where(sa.and_(
            _reports.c.project_id == project_id,
            _reports.c.model_name == model_name,
            _reports.c.set_index == set_index,
        )))
        return rows[0][0] if rows else None

    def _get_lock_owner(self, project_id: str):
        rows = self._rows(
            sa.select(_locks.c.owner).where(_locks.c.project_id == project_id)
        )
        return rows[0][0] if rows else None

    def _set_lock_owner(self, project_id: str, owner: str | None):
        self._exec(_locks.delete().where(_locks.c.project_id == project_id))
        if owner is not None:
            self._exec(_locks.insert().values(project_id=project_id, owner=owner))
