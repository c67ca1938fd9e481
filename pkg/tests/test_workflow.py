import pytest

from annotrack.errors import NotFoundError, ValidationError
from annotrack.geo import GeoPoint
from annotrack.ingest import ExternalAnnotation, LabelSetDescriptor
from annotrack.store.memory import MemoryStore
from annotrack.store.types import Query, SegmentRecord
from annotrack.synth import SynthConfig, synth_generate
from annotrack.workflow import (
    EFFORT_CSV_HEADER,
    WorkflowRunner,
    effort_cycles_from_log,
    effort_report_csv,
    effort_reduction,
    run_full_loop,
)

from conftest import LABELS, straight_track


class TestEffortReduction:
    def test_table_rows_exact(self):
        # printed accounting rows: (57, 6, 271) -> 63 effort, 77%;
        # (19, 6, 273) -> 25, 91%; (10, 6, 271) -> 16, 94%
        cases = [
            (57, 6, 271, 63, 77),
            (19, 6, 273, 25, 91),
            (10, 6, 271, 16, 94),
        ]
        for single, batch, total, effort, pct in cases:
            reduction = effort_reduction(single, batch, total)
            assert single + batch == effort
            assert round(reduction * 100) == pct

    def test_all_batch(self):
        assert effort_reduction(0, 6, 6) == 0.0

    def test_clamped_at_zero(self):
        assert effort_reduction(10, 6, 8) == 0.0

    def test_zero_total_rejected(self):
        with pytest.raises(ValidationError):
            effort_reduction(1, 1, 0)

    def test_fraction_value(self):
        assert effort_reduction(57, 6, 271) == pytest.approx(1 - 63 / 271)


def build_verify_fixture(n=271, wrong=57, runways=("RW-A", "RW-B")):
    """A project with n annotatable segments over len(runways) x 3 groups and
    exactly `wrong` mismatching pre-labels."""
    store = MemoryStore()
    project = store.create_project(
        "fixture", LabelSetDescriptor("fixture", LABELS),
        {"split": {"n_sets": 2, "seed": 0, "validation_set": 2}},
    )
    tracks = [straight_track(f"t{i:03d}", n=2) for i in range(n)]
    store.upsert_tracks(project.id, tracks)
    segments, truth, prelabels = [], {}, []
    for i in range(n):
        sid = f"t{i:03d}__s1"
        runway = runways[i % len(runways)]
        true_label = LABELS[i % 3]
        # the first `wrong` subjects are pre-labeled incorrectly
        pre = LABELS[(i + 1) % 3] if i < wrong else true_label
        segments.append(SegmentRecord(
            segment_id=sid, track_id=f"t{i:03d}", start_idx=0, end_idx=2,
            avg_direction_deg=45.0, runway_id=runway,
            feature=(0.2, 0.2, 0.2, 0.2, 0.2), contains_contact=True,
            climbs_out=False, num_points=2, start_time=0.0, end_time=10.0,
            bbox=(39.9, -75.1, 40.1, -74.9), set_index=1,
        ))
        truth[sid] = true_label
        prelabels.append(ExternalAnnotation(sid, pre, "kmeans:v0"))
    store.replace_segments(project.id, segments)
    count, errors = store.ingest_annotations(project.id, prelabels)
    assert count == n and not errors
    return store, project, truth


class TestVerifyCycle:
    def test_table_cycle_one_counts(self):
        store, project, truth = build_verify_fixture(n=271, wrong=57)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        counts = runner.verify_cycle(1, truth.__getitem__, verifier,
                                     model_ref="kmeans:v0")
        assert counts == (57, 6)

    def test_all_correct_counts_batches_only(self):
        store, project, truth = build_verify_fixture(n=60, wrong=0)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        counts = runner.verify_cycle(1, truth.__getitem__, verifier)
        assert counts == (0, 6)

    def test_ten_misclassified(self):
        store, project, truth = build_verify_fixture(n=271, wrong=10)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        counts = runner.verify_cycle(1, truth.__getitem__, verifier)
        assert counts == (10, 6)

    def test_every_subject_exactly_one_verified_annotation(self):
        store, project, truth = build_verify_fixture(n=90, wrong=12)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        runner.verify_cycle(1, truth.__getitem__, verifier)
        for sid, true_label in truth.items():
            records = store.annotations(project.id, sid)
            assert len(records) == 1
            assert records[0].verified is True
            assert records[0].label == true_label

    def test_no_unverified_model_records_remain(self):
        store, project, truth = build_verify_fixture(n=90, wrong=12)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        runner.verify_cycle(1, truth.__getitem__, verifier)
        remaining = store.query_tracks(
            project.id, Query(annotator="kmeans:v0", verified=False)
        )
        assert remaining == []

    def test_empty_set_rejected(self):
        store, project, truth = build_verify_fixture(n=30, wrong=0)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        # set 2 has no segments at all
        with pytest.raises(ValidationError):
            runner.verify_cycle(2, truth.__getitem__, verifier)

    def test_missing_prelabels_rejected(self):
        store = MemoryStore()
        project = store.create_project(
            "bare", LabelSetDescriptor("bare", LABELS), {}
        )
        store.upsert_tracks(project.id, [straight_track("t1", n=2)])
        store.replace_segments(project.id, [SegmentRecord(
            segment_id="t1__s1", track_id="t1", start_idx=0, end_idx=2,
            avg_direction_deg=0.0, runway_id="RW-A",
            feature=(1.0, 0.0, 0.0, 0.0, 0.0), contains_contact=True,
            climbs_out=False, num_points=2, start_time=0.0, end_time=10.0,
            bbox=(39.9, -75.1, 40.1, -74.9), set_index=1,
        )])
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        with pytest.raises(NotFoundError):
            runner.verify_cycle(1, lambda s: "landing", verifier)

    def test_effort_log_matches_returned_counts(self):
        store, project, truth = build_verify_fixture(n=271, wrong=57)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        counts = runner.verify_cycle(1, truth.__getitem__, verifier)
        cycles = effort_cycles_from_log(store.operation_log(project.id))
        assert len(cycles) == 1
        assert cycles[0].num_tracks == 271
        assert cycles[0].misclassified == counts[0]
        assert cycles[0].batch_ops == counts[1]
        assert cycles[0].annotation_effort == 63
        assert cycles[0].reduction_pct == 77


class TestEffortCsv:
    def test_header_and_rows(self):
        store, project, truth = build_verify_fixture(n=271, wrong=57)
        runner = WorkflowRunner(store, project.name)
        verifier = runner.register_verifier()
        runner.verify_cycle(1, truth.__getitem__, verifier)
        text = runner.effort_report_csv()
        lines = text.splitlines()
        assert lines[0] == EFFORT_CSV_HEADER
        assert lines[1] == "1,271,57,63,77"

    def test_empty_log_gives_header_only(self):
        assert effort_report_csv([]).splitlines() == [EFFORT_CSV_HEADER]


AIRPORT = {"latitude_deg": 40.0, "longitude_deg": -75.0, "elevation_m": 200.0}
LOOP_CONFIG = {
    "airport": AIRPORT,
    "pipeline": {"seed": 3},
    "ml": {"lambda": 1e-3, "epochs": 500, "seed": 7},
    "split": {"n_sets": 4, "seed": 2, "validation_set": 4},
}


def loop_store(synth_seed=42, n_per_behavior=100):
    cfg = SynthConfig(seed=synth_seed, n_per_behavior=n_per_behavior,
                      origin=GeoPoint(**{
                          "latitude_deg": 40.0, "longitude_deg": -75.0,
                          "altitude_m": 200.0,
                      }))
    tracks, truth = synth_generate(cfg)
    store = MemoryStore()
    project = store.create_project(
        "loop", LabelSetDescriptor("loop", LABELS), dict(LOOP_CONFIG)
    )
    store.upsert_tracks(project.id, tracks)
    return store, project, truth


@pytest.fixture(scope="module")
def loop_result():
    store, project, truth = loop_store()
    result = run_full_loop(store, project.name, truth)
    return store, project, result


class TestFullLoop:
    def test_three_cycles_recorded(self, loop_result):
        _, _, result = loop_result
        assert [c.cycle for c in result["effort"]] == [1, 2, 3]
        assert all(c.num_tracks == 75 for c in result["effort"])

    def test_models_evaluated_on_validation_set(self, loop_result):
        _, _, result = loop_result
        assert set(result["reports"]) == {"kmeans:v0", "svm:v1", "svm:v2"}

    def test_svm_beats_bootstrap(self, loop_result):
        _, _, result = loop_result
        assert result["reports"]["svm:v1"].accuracy > \
            result["reports"]["kmeans:v0"].accuracy

    def test_second_iteration_does_not_regress(self, loop_result):
        _, _, result = loop_result
        v1 = result["reports"]["svm:v1"].accuracy
        v2 = result["reports"]["svm:v2"].accuracy
        assert v2 >= v1 - 0.02

    def test_loop_deterministic(self, loop_result):
        _, _, first = loop_result
        store, project, truth = loop_store()
        second = run_full_loop(store, project.name, truth)
        assert second["effort_csv"] == first["effort_csv"]
        for name in first["reports"]:
            assert second["reports"][name] == first["reports"][name]

    def test_train_validation_overlap_rejected(self, loop_result):
        store, project, _ = loop_result
        runner = WorkflowRunner(store, project.name)
        with pytest.raises(ValidationError):
            runner.evaluate_on("svm:v1", 1)

    def test_bootstrap_empty_set_rejected(self, loop_result):
        store, project, _ = loop_result
        runner = WorkflowRunner(store, project.name)
        with pytest.raises(ValidationError):
            runner.bootstrap_cycle(9)

    def test_bootstrap_deterministic_annotations(self):
        store, project, truth = loop_store(n_per_behavior=20)
        runner = WorkflowRunner(store, project.name)
        runner.run_pipeline()
        cycle = runner.bootstrap_cycle(1)
        labels1 = {
            r.subject: r.label
            for r in store.annotations(project.id)
        }
        store2, project2, _ = loop_store(n_per_behavior=20)
        runner2 = WorkflowRunner(store2, project2.name)
        runner2.run_pipeline()
        runner2.bootstrap_cycle(1)
        labels2 = {
            r.subject: r.label
            for r in store2.annotations(project2.id)
        }
        assert labels1 == labels2
        assert cycle.model_ref == "kmeans:v0"
        assert all(not r.verified for r in store.annotations(project.id))

    def test_pipeline_requires_tracks(self):
        store = MemoryStore()
        store.create_project("empty", LabelSetDescriptor("empty", LABELS),
                             dict(LOOP_CONFIG))
        runner = WorkflowRunner(store, "empty")
        with pytest.raises(ValidationError, match="no tracks"):
            runner.run_pipeline()


class TestVerifiedLabelPrecedence:
    def test_latest_verified_label_wins_across_id_widths(self):
        """Two humans disagree; training uses the more recent label even
        when record ids cross a digit boundary (a9 vs a10)."""
        store = MemoryStore()
        project = store.create_project(
            "prec", LabelSetDescriptor("prec", LABELS),
            {"ml": {"lambda": 1e-3, "epochs": 50, "seed": 1}},
        )
        store.upsert_tracks(project.id, [straight_track(f"t{i}", n=2)
                                         for i in range(12)])
        segments = []
        for i in range(12):
            segments.append(SegmentRecord(
                segment_id=f"t{i}__s1", track_id=f"t{i}", start_idx=0,
                end_idx=2, avg_direction_deg=0.0, runway_id="RW-A",
                feature=(1.0, 0.0, 0.0, 0.0, 0.0) if i % 2 else
                        (0.0, 0.0, 0.0, 0.0, 1.0),
                contains_contact=True, climbs_out=False, num_points=2,
                start_time=0.0, end_time=10.0,
                bbox=(39.9, -75.1, 40.1, -74.9), set_index=1,
            ))
        store.replace_segments(project.id, segments)
        first = store.register_annotator("human", "first", role="r")
        second = store.register_annotator("human", "second", role="r")
        # burn through single-digit ids, then have the second opinion win
        for i in range(12):
            store.annotate(project.id, f"t{i}__s1", "landing", first)
        store.annotate(project.id, "t0__s1", "takeoff", second)
        runner = WorkflowRunner(store, "prec")
        _, labels, subjects = runner._verified_dataset([1])
        by_subject = dict(zip(subjects, labels))
        assert by_subject["t0__s1"] == "takeoff"
        assert by_subject["t1__s1"] == "landing"
