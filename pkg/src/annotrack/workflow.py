"""The annotate-infer-validate iteration and its effort accounting.

A cycle pre-labels one dataset split with a model (Kmeans bootstrap first,
then successive SVM iterations), lets a verifier confirm each (runway,
class) group with one batch operation and correct the misclassified
subjects individually, and retrains on the verified labels. The effort
ledger is derived from the store's operation log, so the interactive HTTP
path and the headless CLI path produce identical reports.
"""
from __future__ import annotations

import csv
import io
import uuid
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ml
from .errors import NotFoundError, ValidationError
from .geo import GeoPoint, Track
from .ingest import ExternalAnnotation, split_dataset
from .pipeline import PipelineConfig, build_segments, detect_runways
from .store.base import Store
from .store.types import OpLogEntry, Query, RunwayRecord, SegmentRecord
from .synth import TrackTruth

EFFORT_CSV_HEADER = "cycle,num_tracks,misclassified,annotation_effort,effort_reduction_pct"


def effort_reduction(single_track_annotations: int, batch_ops: int,
                     total_tracks: int) -> float:
    """Fraction of annotation labor saved versus labeling every track by hand.

    1 - (singles + batch operations) / total, clamped at zero.
    """
    if total_tracks < 1:
        raise ValidationError("total_tracks must be >= 1")
    return max(0.0, 1.0 - (single_track_annotations + batch_ops) / total_tracks)


@dataclass(frozen=True)
class EffortCycle:
    cycle: int
    num_tracks: int
    misclassified: int
    batch_ops: int

    @property
    def annotation_effort(self) -> int:
        return self.misclassified + self.batch_ops

    @property
    def reduction(self) -> float:
        return effort_reduction(self.misclassified, self.batch_ops, self.num_tracks)

    @property
    def reduction_pct(self) -> int:
        return round(self.reduction * 100)


@dataclass
class IterationCycle:
    cycle_number: int
    training_sets: list[int]
    model_ref: str
    misclassified_count: int | None = None
    batch_op_count: int | None = None
    eval_report: ml.EvalReport | None = None


def effort_cycles_from_log(entries: list[OpLogEntry]) -> list[EffortCycle]:
    """Reconstruct per-cycle effort from the operation log.

    Each model pre-labeling (ingest) event opens a cycle over its subjects;
    human operations touching those subjects before the next event are the
    cycle's verification work: distinct singly-annotated subjects are the
    misclassified count, batch operations count once each.
    """
    ordered = sorted(entries, key=lambda e: e.seq)
    ingests = [e for e in ordered
               if e.kind == "ingest" and e.annotator_kind == "model"]
    cycles = []
    for i, event in enumerate(ingests):
        lo = event.seq
        hi = ingests[i + 1].seq if i + 1 < len(ingests) else float("inf")
        subjects = set(event.subjects)
        singles: set[str] = set()
        batches = 0
        for op in ordered:
            if not (lo < op.seq < hi) or op.annotator_kind != "human":
                continue
            touched = subjects.intersection(op.subjects)
            if not touched:
                continue
            if op.kind == "single":
                singles |= touched
            elif op.kind == "batch":
                batches += 1
        cycles.append(EffortCycle(
            cycle=i + 1, num_tracks=len(subjects),
            misclassified=len(singles), batch_ops=batches,
        ))
    return cycles


def effort_report_csv(cycles: list[EffortCycle]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EFFORT_CSV_HEADER.split(","))
    for c in cycles:
        writer.writerow([c.cycle, c.num_tracks, c.misclassified,
                         c.annotation_effort, c.reduction_pct])
    return out.getvalue()


class WorkflowRunner:
    """Drives the iteration workflow for one project on one store."""

    def __init__(self, store: Store, project_name: str, owner: str | None = None):
        self.store = store
        self.project = store.get_project(project_name)
        self.owner = owner or f"runner-{uuid.uuid4().hex[:8]}"

    # -- config accessors -------------------------------------------------------

    @property
    def airport_ref(self) -> GeoPoint:
        airport = self.project.config.get("airport")
        if not airport:
            raise ValidationError(
                f"project {self.project.name!r} has no airport reference configured"
            )
        return GeoPoint(airport["latitude_deg"], airport["longitude_deg"],
                        airport.get("elevation_m", 0.0))

    @property
    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig.from_dict(self.project.config.get("pipeline", {}))

    @property
    def ml_config(self) -> dict:
        cfg = {"lambda": 1e-3, "epochs": 200, "seed": 0}
        cfg.update(self.project.config.get("ml", {}))
        return cfg

    @property
    def split_config(self) -> dict:
        cfg = {"n_sets": 4, "seed": 0}
        cfg.update(self.project.config.get("split", {}))
        cfg.setdefault("validation_set", cfg["n_sets"])
        return cfg

    def _lock(self):
        return self.store.workflow_lock(self.project.id, self.owner)

    # -- pipeline ----------------------------------------------------------------

    def run_pipeline(self) -> dict:
        """Detect runways, segment every track, compute features, split sets."""
        with self._lock():
            tracks = self.store.tracks(self.project.id)
            if not tracks:
                raise ValidationError(
                    f"no tracks in project {self.project.name!r}"
                )
            cfg = self.pipeline_config
            airport = self.airport_ref
            runways = detect_runways(tracks, airport, cfg)
            segments = []
            for track in tracks:
                segments.extend(
                    _to_records(track, build_segments(track, airport, runways, cfg))
                )
            self.store.replace_runways(self.project.id, [
                RunwayRecord(
                    runway_id=r.id,
                    latitude_deg=r.centroid.latitude_deg,
                    longitude_deg=r.centroid.longitude_deg,
                    altitude_m=r.centroid.altitude_m,
                    heading_deg=r.heading_deg,
                    length_m=r.length_m,
                ) for r in runways
            ])
            self.store.replace_segments(self.project.id, segments)
            split_cfg = self.split_config
            ids = sorted(s.segment_id for s in segments)
            sets = split_dataset(ids, split_cfg["n_sets"], split_cfg["seed"])
            assignment = {}
            for set_index, members in enumerate(sets, start=1):
                for sid in members:
                    assignment[sid] = set_index
            self.store.assign_sets(self.project.id, assignment)
            return {
                "runways": [r.id for r in runways],
                "segments": len(segments),
                "sets": {i + 1: len(s) for i, s in enumerate(sets)},
            }

    def _set_segments(self, set_index: int) -> list[SegmentRecord]:
        segments = self.store.segments(self.project.id, set_index=set_index)
        if not segments:
            raise ValidationError(f"dataset set {set_index} is empty")
        return segments

    def _features(self, segments: list[SegmentRecord]) -> np.ndarray:
        missing = [s.segment_id for s in segments if s.feature is None]
        if missing:
            raise ValidationError(f"segments without features: {missing[:3]}")
        return np.array([s.feature for s in segments], dtype=float)

    # -- oracle helpers ------------------------------------------------------------

    def truth_oracle(self, truth: dict[str, TrackTruth]) -> Callable[[str], str]:
        """Subject-level oracle from per-track generator truth."""
        def oracle(subject_id: str) -> str:
            segment = self.store._get_segment(self.project.id, subject_id)
            track_id = segment.track_id if segment else subject_id
            if track_id not in truth:
                raise NotFoundError(f"no truth for track {track_id!r}")
            return truth[track_id].behavior
        return oracle

    def register_verifier(self, name: str = "verifier") -> object:
        return self.store.register_annotator("human", name, role="verifier")

    def annotate_truth(self, set_index: int, oracle: Callable[[str], str],
                       verifier) -> int:
        """Directly truth-label a set (used for the held-out validation set)."""
        with self._lock():
            segments = self._set_segments(set_index)
            for seg in segments:
                self.store.annotate(self.project.id, seg.segment_id,
                                    oracle(seg.segment_id), verifier)
            return len(segments)

    # -- cycle operations ------------------------------------------------------------

    def bootstrap_cycle(self, set_index: int, version: str = "v0") -> IterationCycle:
        """Fit Kmeans from the nominal init on one set and ingest its labels."""
        with self._lock():
            segments = self._set_segments(set_index)
            features = self._features(segments)
            labels = self.project.labels
            if set(labels) != set(ml.NOMINAL_CENTROIDS):
                raise ValidationError(
                    "nominal Kmeans init is defined for labels "
                    f"{sorted(ml.NOMINAL_CENTROIDS)}, project has {sorted(labels)}"
                )
            init = ml.KmeansModel(
                centroids=np.array([ml.NOMINAL_CENTROIDS[c] for c in labels]),
                class_names=tuple(labels),
            )
            model = ml.kmeans_fit(features, init)
            name = f"kmeans:{version}"
            payload = ml.model_to_json(model)
            payload["training_sets"] = [set_index]
            self.store.save_model(self.project.id, name, payload)
            records = [
                ExternalAnnotation(
                    subject=seg.segment_id,
                    label=ml.kmeans_assign(model, features[i]),
                    annotator_name=name,
                )
                for i, seg in enumerate(segments)
            ]
            count, errors = self.store.ingest_annotations(self.project.id, records)
            if errors:
                raise ValidationError(f"bootstrap ingest errors: {errors[:3]}")
            return IterationCycle(
                cycle_number=1, training_sets=[set_index], model_ref=name,
            )

    def verify_cycle(self, set_index: int, oracle: Callable[[str], str],
                     verifier, model_ref: str | None = None) -> tuple[int, int]:
        """Confirm one set's pre-labels: one batch per (runway, class) group,
        one single annotation per misclassified subject.

        Returns (misclassified_count, batch_op_count).
        """
        with self._lock():
            segments = self._set_segments(set_index)
            if model_ref is None:
                model_ref = self._latest_prelabel_model(
                    {s.segment_id for s in segments}
                )
            prelabel: dict[str, str] = {}
            annotator = self.store.resolve_annotator(model_ref)
            for record in self.store.annotations(self.project.id):
                if record.annotator_id == annotator.id:
                    prelabel[record.subject] = record.label
            missing = [s.segment_id for s in segments
                       if s.segment_id not in prelabel]
            if missing:
                raise ValidationError(
                    f"missing {model_ref} pre-labels for {missing[:3]}"
                )

            groups: dict[tuple[str | None, str], list[str]] = {}
            for seg in segments:
                key = (seg.runway_id, prelabel[seg.segment_id])
                groups.setdefault(key, []).append(seg.segment_id)

            batch_ops = 0
            singles: list[tuple[str, str]] = []
            for (runway_id, label), members in sorted(
                groups.items(), key=lambda kv: (kv[0][0] or "", kv[0][1])
            ):
                if runway_id is None:
                    # no runway to scope a batch query; verify individually
                    singles.extend((m, oracle(m)) for m in members)
                    continue
                count = self.store.batch_annotate(
                    self.project.id,
                    Query(label=label, annotator=model_ref,
                          runway_id=runway_id, verified=False),
                    label, verifier,
                )
                if count != len(members):
                    raise ValidationError(
                        f"batch over ({runway_id}, {label}) hit {count} subjects, "
                        f"expected {len(members)}"
                    )
                batch_ops += 1
                singles.extend(
                    (m, oracle(m)) for m in members if oracle(m) != label
                )
            for subject, true_label in sorted(singles):
                self.store.annotate(self.project.id, subject, true_label, verifier)
            return len(singles), batch_ops

    def _latest_prelabel_model(self, subjects: set[str]) -> str:
        model = self.prelabel_model_for_subjects(subjects)
        if model is None:
            raise NotFoundError("no model pre-labels found for this set")
        return model

    def prelabel_model_for_subjects(self, subjects: set[str]) -> str | None:
        for entry in reversed(self.store.operation_log(self.project.id)):
            if (entry.kind == "ingest" and entry.annotator_kind == "model"
                    and subjects.intersection(entry.subjects)):
                return entry.annotator_display
        return None

    def prelabel_model_for(self, set_index: int) -> str | None:
        segments = self.store.segments(self.project.id, set_index=set_index)
        return self.prelabel_model_for_subjects(
            {s.segment_id for s in segments}
        )

    def train_cycle(self, training_set_ids: list[int], version: str) -> str:
        """Train an SVM iteration on the verified labels of the given sets."""
        with self._lock():
            features, labels, _ = self._verified_dataset(training_set_ids)
            cfg = self.ml_config
            model = ml.svm_train(
                features, labels,
                lam=cfg["lambda"], epochs=cfg["epochs"], seed=cfg["seed"],
                class_names=tuple(self.project.labels),
            )
            name = f"svm:{version}"
            payload = ml.model_to_json(model)
            payload["training_sets"] = sorted(training_set_ids)
            self.store.save_model(self.project.id, name, payload)
            self.store.register_annotator("model", "svm", iteration=version)
            return name

    def _verified_dataset(self, set_ids: list[int]):
        segments = []
        for set_index in set_ids:
            segments.extend(self._set_segments(set_index))
        verified: dict[str, tuple[int, str]] = {}
        for record in self.store.annotations(self.project.id):
            if record.verified:
                seq = _record_seq(record.id)
                prev = verified.get(record.subject)
                if prev is None or seq > prev[0]:
                    verified[record.subject] = (seq, record.label)
        missing = [s.segment_id for s in segments if s.segment_id not in verified]
        if missing:
            raise ValidationError(
                f"no verified labels for {len(missing)} subjects, "
                f"e.g. {missing[:3]}"
            )
        features = self._features(segments)
        labels = [verified[s.segment_id][1] for s in segments]
        return features, labels, [s.segment_id for s in segments]

    def infer_cycle(self, model_ref: str, set_index: int) -> int:
        """Pre-label one set with a trained model (starts a new cycle)."""
        with self._lock():
            payload = self.store.get_model(self.project.id, model_ref)
            model = ml.model_from_json(payload)
            segments = self._set_segments(set_index)
            features = self._features(segments)
            records = [
                ExternalAnnotation(
                    subject=seg.segment_id,
                    label=_predict(model, features[i]),
                    annotator_name=model_ref,
                )
                for i, seg in enumerate(segments)
            ]
            count, errors = self.store.ingest_annotations(self.project.id, records)
            if errors:
                raise ValidationError(f"inference ingest errors: {errors[:3]}")
            return count

    def evaluate_on(self, model_ref: str, validation_set: int) -> ml.EvalReport:
        """Evaluate a model against the verified labels of a held-out set.

        Predictions are computed in memory and never ingested, so evaluation
        does not open an effort cycle.
        """
        with self._lock():
            payload = self.store.get_model(self.project.id, model_ref)
            if validation_set in payload.get("training_sets", []):
                raise ValidationError(
                    f"validation set {validation_set} overlaps the training sets "
                    f"of {model_ref}"
                )
            model = ml.model_from_json(payload)
            features, labels, _ = self._verified_dataset([validation_set])
            predicted = [_predict(model, f) for f in features]
            report = ml.evaluate(predicted, labels, tuple(self.project.labels))
            self.store.save_eval_report(self.project.id, model_ref,
                                        validation_set, report.to_dict())
            return report

    # -- reporting ---------------------------------------------------------------

    def effort_report(self) -> list[EffortCycle]:
        return effort_cycles_from_log(self.store.operation_log(self.project.id))

    def effort_report_csv(self) -> str:
        return effort_report_csv(self.effort_report())


def _record_seq(record_id: str) -> int:
    """Creation order of an annotation id ('a17' -> 17)."""
    digits = "".join(ch for ch in record_id if ch.isdigit())
    return int(digits) if digits else 0


def _predict(model, feature) -> str:
    if isinstance(model, ml.KmeansModel):
        return ml.kmeans_assign(model, feature)
    return ml.svm_predict(model, feature)


def _to_records(track: Track, segments) -> list[SegmentRecord]:
    records = []
    for seg in segments:
        start, end = seg.point_range
        points = track.points[start:end]
        lats = [p.geo.latitude_deg for p in points]
        lons = [p.geo.longitude_deg for p in points]
        records.append(SegmentRecord(
            segment_id=seg.segment_id,
            track_id=seg.track_id,
            start_idx=start,
            end_idx=end,
            avg_direction_deg=seg.avg_direction_deg,
            runway_id=seg.runway_id,
            feature=tuple(seg.feature) if seg.feature is not None else None,
            contains_contact=seg.contains_contact,
            climbs_out=seg.climbs_out,
            num_points=len(points),
            start_time=points[0].timestamp_s,
            end_time=points[-1].timestamp_s,
            bbox=(min(lats), min(lons), max(lats), max(lons)),
        ))
    return records


def run_full_loop(store: Store, project_name: str,
                  truth: dict[str, TrackTruth], n_cycles: int = 3,
                  verifier_name: str = "verifier") -> dict:
    """The headless reproduction of the iteration narrative.

    Pipeline, validation-set truth, then n_cycles of pre-label/verify with
    an SVM retrained after each of the first n_cycles-1 verifications.
    Returns cycles, model refs, and evaluation reports.
    """
    runner = WorkflowRunner(store, project_name)
    runner.run_pipeline()
    oracle = runner.truth_oracle(truth)
    verifier = runner.register_verifier(verifier_name)
    split_cfg = runner.split_config
    validation_set = split_cfg["validation_set"]
    runner.annotate_truth(validation_set, oracle, verifier)

    cycles: list[IterationCycle] = []
    reports: dict[str, ml.EvalReport] = {}
    bootstrap = runner.bootstrap_cycle(1)
    mis, batches = runner.verify_cycle(1, oracle, verifier,
                                       model_ref=bootstrap.model_ref)
    bootstrap.misclassified_count, bootstrap.batch_op_count = mis, batches
    reports[bootstrap.model_ref] = runner.evaluate_on(bootstrap.model_ref,
                                                      validation_set)
    cycles.append(bootstrap)

    trained_sets: list[int] = [1]
    for cycle_number in range(2, n_cycles + 1):
        version = f"v{cycle_number - 1}"
        model_ref = runner.train_cycle(list(trained_sets), version)
        reports[model_ref] = runner.evaluate_on(model_ref, validation_set)
        target_set = cycle_number
        if target_set == validation_set:
            break
        runner.infer_cycle(model_ref, target_set)
        mis, batches = runner.verify_cycle(target_set, oracle, verifier,
                                           model_ref=model_ref)
        cycles.append(IterationCycle(
            cycle_number=cycle_number, training_sets=list(trained_sets),
            model_ref=model_ref, misclassified_count=mis,
            batch_op_count=batches,
        ))
        trained_sets.append(target_set)

    return {
        "cycles": cycles,
        "reports": reports,
        "effort": runner.effort_report(),
        "effort_csv": runner.effort_report_csv(),
    }
