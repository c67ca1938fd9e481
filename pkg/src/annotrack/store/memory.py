"""Embedded store: in-memory state with optional JSON file persistence.

Used by tests and the CLI. All records are immutable dataclasses, so a
transaction snapshot only needs to copy the containers, not the records.
"""
from __future__ import annotations

import contextlib
import json
import os
import tempfile
import threading

from ..errors import StorageError
from ..geo import GeoPoint, Track, TrackPoint
from ..ingest import LabelSetDescriptor
from .base import Store
from .types import (
    AnnotationRecord,
    AnnotatorRecord,
    OpLogEntry,
    Project,
    RunwayRecord,
    SegmentRecord,
)


class MemoryStore(Store):
    def __init__(self):
        super().__init__()
        self._counters: dict[str, int] = {}
        self._projects: dict[str, Project] = {}
        self._tracks: dict[str, dict[str, Track]] = {}
        self._segs: dict[str, dict[str, SegmentRecord]] = {}
        self._rwys: dict[str, list[RunwayRecord]] = {}
        self._annotator_records: dict[str, AnnotatorRecord] = {}
        # project -> subject -> annotator_id -> record
        self._current: dict[str, dict[str, dict[str, AnnotationRecord]]] = {}
        self._history: dict[str, list[tuple[AnnotationRecord, str]]] = {}
        self._counts: dict[str, dict[str, int]] = {}
        self._ops: dict[str, list[OpLogEntry]] = {}
        self._models: dict[str, dict[str, dict]] = {}
        self._reports: dict[str, dict[tuple[str, int], dict]] = {}
        self._lock_owners: dict[str, str] = {}
        self._txn_depth = 0
        # the snapshot covers the whole store, so transactions serialize
        # globally; per-project write locks in the base class still allow
        # concurrent reads
        self._txn_lock = threading.RLock()
        self._dirty = False

    # -- transactions ---------------------------------------------------------

    def _snapshot(self):
        return {
            "counters": dict(self._counters),
            "projects": dict(self._projects),
            "tracks": {p: dict(v) for p, v in self._tracks.items()},
            "segs": {p: dict(v) for p, v in self._segs.items()},
            "rwys": {p: list(v) for p, v in self._rwys.items()},
            "annotators": dict(self._annotator_records),
            "current": {p: {s: dict(a) for s, a in v.items()}
                        for p, v in self._current.items()},
            "history": {p: list(v) for p, v in self._history.items()},
            "counts": {p: dict(v) for p, v in self._counts.items()},
            "ops": {p: list(v) for p, v in self._ops.items()},
            "models": {p: {k: dict(m) for k, m in v.items()} for p, v in self._models.items()},
            "reports": {p: dict(v) for p, v in self._reports.items()},
            "locks": dict(self._lock_owners),
        }

    def _restore(self, snap):
        self._counters = snap["counters"]
        self._projects = snap["projects"]
        self._tracks = snap["tracks"]
        self._segs = snap["segs"]
        self._rwys = snap["rwys"]
        self._annotator_records = snap["annotators"]
        self._current = snap["current"]
        self._history = snap["history"]
        self._counts = snap["counts"]
        self._ops = snap["ops"]
        self._models = snap["models"]
        self._reports = snap["reports"]
        self._lock_owners = snap["locks"]

    @contextlib.contextmanager
    def _txn(self):
        with self._txn_lock:
            if self._txn_depth > 0:
                yield
                return
            snap = self._snapshot()
            self._txn_depth += 1
            try:
                yield
            except BaseException:
                self._restore(snap)
                raise
            finally:
                self._txn_depth -= 1
            self._dirty = True

    # -- primitives -------------------------------------------------------------

    def _next_id(self, kind: str) -> int:
        self._counters[kind] = self._counters.get(kind, 0) + 1
        return self._counters[kind]

    def _put_project(self, project: Project):
        self._projects[project.id] = project
        self._tracks.setdefault(project.id, {})
        self._segs.setdefault(project.id, {})
        self._rwys.setdefault(project.id, [])
        self._current.setdefault(project.id, {})
        self._history.setdefault(project.id, [])
        self._counts.setdefault(project.id, {})
        self._ops.setdefault(project.id, [])
        self._models.setdefault(project.id, {})
        self._reports.setdefault(project.id, {})
        self._dirty = True

    def _find_project(self, name: str):
        for project in self._projects.values():
            if project.name == name:
                return project
        return None

    def _get_project_record(self, project_id: str):
        return self._projects.get(project_id)

    def _list_projects(self):
        return list(self._projects.values())

    def _put_track(self, project_id: str, track: Track):
        self._tracks[project_id][track.track_id] = track
        self._dirty = True

    def _get_track_record(self, project_id: str, track_id: str):
        return self._tracks.get(project_id, {}).get(track_id)

    def _track_ids(self, project_id: str):
        return list(self._tracks.get(project_id, {}))

    def _track_spans(self, project_id: str):
        return {
            tid: (t.start_time, t.end_time)
            for tid, t in self._tracks.get(project_id, {}).items()
            if len(t.points) > 0
        }

    def _put_segments(self, project_id: str, segments):
        for seg in segments:
            self._segs[project_id][seg.segment_id] = seg
        self._dirty = True

    def _delete_segments(self, project_id: str, track_id: str | None = None):
        segs = self._segs[project_id]
        if track_id is None:
            segs.clear()
        else:
            for sid in [s for s, seg in segs.items() if seg.track_id == track_id]:
                del segs[sid]
        self._dirty = True

    def _segments(self, project_id: str):
        return list(self._segs.get(project_id, {}).values())

    def _get_segment(self, project_id: str, segment_id: str):
        return self._segs.get(project_id, {}).get(segment_id)

    def _set_segment_sets(self, project_id: str, assignment: dict[str, int]):
        segs = self._segs[project_id]
        for sid, set_index in assignment.items():
            seg = segs[sid]
            segs[sid] = SegmentRecord(**{**seg.__dict__, "set_index": set_index})
        self._dirty = True

    def _put_runways(self, project_id: str, runways):
        self._rwys[project_id] = list(runways)
        self._dirty = True

    def _runways(self, project_id: str):
        return list(self._rwys.get(project_id, []))

    def _put_annotator(self, record: AnnotatorRecord):
        self._annotator_records[record.id] = record
        self._dirty = True

    def _annotators(self):
        return list(self._annotator_records.values())

    def _current_annotations(self, project_id: str):
        return [
            record
            for by_annotator in self._current.get(project_id, {}).values()
            for record in by_annotator.values()
        ]

    def _annotations_for_subject(self, project_id: str, subject: str):
        return list(self._current.get(project_id, {}).get(subject, {}).values())

    def _segment_ids_for_track(self, project_id: str, track_id: str):
        return {
            sid for sid, seg in self._segs.get(project_id, {}).items()
            if seg.track_id == track_id
        }

    def _set_annotation(self, project_id: str, record: AnnotationRecord):
        by_subject = self._current[project_id].setdefault(record.subject, {})
        by_subject[record.annotator_id] = record
        self._dirty = True

    def _remove_annotation(self, project_id: str, subject: str, annotator_id: str):
        by_subject = self._current[project_id].get(subject)
        if by_subject is not None:
            by_subject.pop(annotator_id, None)
            if not by_subject:
                del self._current[project_id][subject]
        self._dirty = True

    def _append_history(self, project_id: str, record, superseded_at: str):
        self._history[project_id].append((record, superseded_at))
        self._dirty = True

    def _meta_counts(self, project_id: str):
        return dict(self._counts.get(project_id, {}))

    def _set_meta_count(self, project_id: str, track_id: str, count: int):
        self._counts[project_id][track_id] = count
        self._dirty = True

    def _append_oplog(self, project_id: str, entry: OpLogEntry):
        self._ops[project_id].append(entry)
        self._dirty = True

    def _oplog_entries(self, project_id: str):
        return list(self._ops.get(project_id, []))

    def _put_model(self, project_id: str, name: str, payload: dict):
        self._models[project_id][name] = payload
        self._dirty = True

    def _get_model_payload(self, project_id: str, name: str):
        return self._models.get(project_id, {}).get(name)

    def _model_names(self, project_id: str):
        return list(self._models.get(project_id, {}))

    def _put_report(self, project_id: str, model_name: str, set_index: int, report: dict):
        self._reports[project_id][(model_name, set_index)] = report
        self._dirty = True

    def _get_report(self, project_id: str, model_name: str, set_index: int):
        return self._reports.get(project_id, {}).get((model_name, set_index))

    def _get_lock_owner(self, project_id: str):
        return self._lock_owners.get(project_id)

    def _set_lock_owner(self, project_id: str, owner: str | None):
        if owner is None:
            self._lock_owners.pop(project_id, None)
        else:
            self._lock_owners[project_id] = owner
        self._dirty = True

    # -- JSON state (for the file-backed variant) -----------------------------

    def dump_state(self) -> dict:
        return {
            "counters": self._counters,
            "annotators": [a.__dict__ for a in self._annotator_records.values()],
            "projects": [
                {
                    "id": p.id,
                    "name": p.name,
                    "labels": list(p.label_set.labels),
                    "label_project": p.label_set.project_name,
                    "created_at": p.created_at,
                    "config": p.config,
                    "tracks": [_track_to_json(t) for t in self._tracks[p.id].values()],
                    "segments": [_seg_to_json(s) for s in self._segs[p.id].values()],
                    "runways": [r.__dict__ for r in self._rwys[p.id]],
                    "annotations": [
                        a.__dict__
                        for by_annotator in self._current[p.id].values()
                        for a in by_annotator.values()
                    ],
                    "history": [
                        {**rec.__dict__, "superseded_at": when}
                        for rec, when in self._history[p.id]
                    ],
                    "counts": self._counts[p.id],
                    "oplog": [
                        {**e.__dict__, "subjects": list(e.subjects)}
                        for e in self._ops[p.id]
                    ],
                    "models": self._models[p.id],
                    "reports": [
                        {"model": m, "set": s, "report": r}
                        for (m, s), r in self._reports[p.id].items()
                    ],
                    "lock_owner": self._lock_owners.get(p.id),
                }
                for p in self._projects.values()
            ],
        }

    def load_state(self, state: dict):
        self._counters = dict(state.get("counters", {}))
        for a in state.get("annotators", []):
            self._annotator_records[a["id"]] = AnnotatorRecord(**a)
        for pj in state.get("projects", []):
            project = Project(
                id=pj["id"],
                name=pj["name"],
                label_set=LabelSetDescriptor(
                    project_name=pj["label_project"], labels=tuple(pj["labels"])
                ),
                created_at=pj["created_at"],
                config=pj.get("config", {}),
            )
            self._put_project(project)
            for tj in pj["tracks"]:
                self._tracks[project.id][tj["track_id"]] = _track_from_json(tj)
            for sj in pj["segments"]:
                seg = _seg_from_json(sj)
                self._segs[project.id][seg.segment_id] = seg
            self._rwys[project.id] = [RunwayRecord(**r) for r in pj["runways"]]
            for aj in pj["annotations"]:
                rec = AnnotationRecord(**aj)
                self._current[project.id].setdefault(rec.subject, {})[
                    rec.annotator_id
                ] = rec
            for hj in pj.get("history", []):
                when = hj.pop("superseded_at")
                self._history[project.id].append((AnnotationRecord(**hj), when))
            self._counts[project.id] = dict(pj.get("counts", {}))
            for ej in pj.get("oplog", []):
                ej = dict(ej)
                ej["subjects"] = tuple(ej["subjects"])
                self._ops[project.id].append(OpLogEntry(**ej))
            self._models[project.id] = dict(pj.get("models", {}))
            for rj in pj.get("reports", []):
                self._reports[project.id][(rj["model"], rj["set"])] = rj["report"]
            if pj.get("lock_owner"):
                self._lock_owners[project.id] = pj["lock_owner"]
        self._dirty = False


class FileStore(MemoryStore):
    """MemoryStore persisted to a single JSON file.

    State loads at construction and writes back on flush()/close(); the
    write is atomic (temp file + rename).
    """

    def __init__(self, path: str):
        super().__init__()
        self.path = path
        if os.path.exists(path):
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    self.load_state(json.load(fh))
            except (OSError, json.JSONDecodeError) as exc:
                raise StorageError(f"cannot load store file {path!r}: {exc}") from exc

    def flush(self):
        if not self._dirty:
            return
        directory = os.path.dirname(os.path.abspath(self.path)) or "."
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(self.dump_state(), fh)
            os.replace(tmp, self.path)
        except OSError as exc:
            with contextlib.suppress(OSError):
                os.unlink(tmp)
            raise StorageError(f"cannot write store file {self.path!r}: {exc}") from exc
        self._dirty = False


def _track_to_json(track: Track) -> dict:
    return {
        "track_id": track.track_id,
        "points": [
            [p.timestamp_s, p.geo.latitude_deg, p.geo.longitude_deg, p.geo.altitude_m]
            for p in track.points
        ],
        "extras": track.extras,
    }


def _track_from_json(doc: dict) -> Track:
    tid = doc["track_id"]
    points = [
        TrackPoint(GeoPoint(lat, lon, alt), ts, tid)
        for ts, lat, lon, alt in doc["points"]
    ]
    return Track(tid, points, {k: list(v) for k, v in doc.get("extras", {}).items()})


def _seg_to_json(seg: SegmentRecord) -> dict:
    doc = dict(seg.__dict__)
    doc["feature"] = list(seg.feature)
    doc["bbox"] = list(seg.bbox)
    return doc


def _seg_from_json(doc: dict) -> SegmentRecord:
    doc = dict(doc)
    doc["feature"] = tuple(doc["feature"])
    doc["bbox"] = tuple(doc["bbox"])
    return SegmentRecord(**doc)
