import pytest
from fastapi.testclient import TestClient

from annotrack.api.app import create_app
from annotrack.api.auth import AuthManager
from annotrack.config import DEFAULT_FORMAT_YAML
from annotrack.ingest import parse_format_descriptor, serialize_tracks
from annotrack.store.memory import MemoryStore
from annotrack.synth import SynthConfig, synth_generate

from conftest import LABELS

AIRPORT = {"latitude_deg": 40.0, "longitude_deg": -75.0, "elevation_m": 200.0}
PROJECT_BODY = {
    "name": "karb-traffic",
    "labels": list(LABELS),
    "airport": AIRPORT,
    "filter": {"radius_nm": 120, "agl_ceiling_ft": 1500},
    "pipeline": {"seed": 3},
    "ml": {"lambda": 1e-3, "epochs": 300, "seed": 7},
    "split": {"n_sets": 4, "seed": 2, "validation_set": 4},
}


@pytest.fixture
def service():
    store = MemoryStore()
    auth = AuthManager([{"username": "u1", "password": "pw", "role": "annotator"}])
    app = create_app(store, auth)
    client = TestClient(app, raise_server_exceptions=False)
    token = client.post("/api/auth/login",
                        json={"username": "u1", "password": "pw"}).json()["token"]
    client.headers["Authorization"] = f"Bearer {token}"
    return store, client


def upload_synth(client, n_per_behavior=12, seed=8):
    cfg = SynthConfig(seed=seed, n_per_behavior=n_per_behavior)
    tracks, truth = synth_generate(cfg)
    desc = parse_format_descriptor(DEFAULT_FORMAT_YAML)
    payload = serialize_tracks(tracks, desc)
    response = client.post(
        "/api/projects/karb-traffic/tracks?format=opensky_v1",
        content=payload.encode(),
    )
    assert response.status_code == 201, response.text
    return tracks, truth, response.json()


class TestAuth:
    def test_request_without_token_401(self, service):
        _, client = service
        bare = TestClient(client.app, raise_server_exceptions=False)
        response = bare.get("/api/projects")
        assert response.status_code == 401
        assert response.json()["code"] == "unauthenticated"

    def test_bad_token_401(self, service):
        _, client = service
        bare = TestClient(client.app, raise_server_exceptions=False)
        bare.headers["Authorization"] = "Bearer bogus"
        assert bare.get("/api/projects").status_code == 401

    def test_bad_credentials_401(self, service):
        _, client = service
        response = client.post("/api/auth/login",
                               json={"username": "u1", "password": "nope"})
        assert response.status_code == 401

    def test_login_ok(self, service):
        _, client = service
        response = client.post("/api/auth/login",
                               json={"username": "u1", "password": "pw"})
        assert response.status_code == 200
        assert "token" in response.json()


class TestProjectsAndUpload:
    def test_create_and_get_project(self, service):
        _, client = service
        response = client.post("/api/projects", json=PROJECT_BODY)
        assert response.status_code == 201
        got = client.get("/api/projects/karb-traffic")
        assert got.status_code == 200
        assert got.json()["labels"] == list(LABELS)

    def test_duplicate_project_422(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        response = client.post("/api/projects", json=PROJECT_BODY)
        assert response.status_code == 422
        assert response.json()["code"] == "validation"

    def test_unknown_project_404(self, service):
        _, client = service
        response = client.get("/api/projects/ghost")
        assert response.status_code == 404
        assert response.json()["code"] == "not_found"

    def test_upload_and_query_tracks(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, _, result = upload_synth(client)
        assert result["ingested_tracks"] == len(tracks)
        listing = client.get("/api/projects/karb-traffic/tracks").json()
        assert listing["total"] == len(tracks)

    def test_upload_unknown_format_404(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        response = client.post(
            "/api/projects/karb-traffic/tracks?format=nope", content=b"x"
        )
        assert response.status_code == 404

    def test_register_custom_format(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        custom = DEFAULT_FORMAT_YAML.replace("opensky_v1", "custom_v2")
        response = client.post("/api/projects/karb-traffic/formats",
                               content=custom.encode())
        assert response.status_code == 201
        assert response.json()["format_name"] == "custom_v2"

    def test_malformed_format_422(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        response = client.post("/api/projects/karb-traffic/formats",
                               content=b"format_name: x\n")
        assert response.status_code == 422


class TestTrackDetailAndAnnotations:
    def test_get_track_detail(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, _, _ = upload_synth(client)
        tid = tracks[0].track_id
        detail = client.get(f"/api/projects/karb-traffic/tracks/{tid}").json()
        assert detail["meta"]["num_points"] >= 2
        assert detail["track"]["track_id"] == tid

    def test_unknown_track_404(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        assert client.get("/api/projects/karb-traffic/tracks/zzz").status_code == 404

    def test_single_annotation(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, _, _ = upload_synth(client)
        tid = tracks[0].track_id
        response = client.post("/api/projects/karb-traffic/annotations",
                               json={"subject": tid, "label": "landing"})
        assert response.status_code == 201
        body = response.json()
        assert body["verified"] is True
        assert body["annotator"] == "u1"

    def test_bad_label_422(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, _, _ = upload_synth(client)
        response = client.post(
            "/api/projects/karb-traffic/annotations",
            json={"subject": tracks[0].track_id, "label": "hover"},
        )
        assert response.status_code == 422

    def test_ingest_and_batch_and_export(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, _, _ = upload_synth(client)
        ids = [t.track_id for t in tracks]
        rows = [[tid, "landing"] for tid in ids[:5]]
        response = client.post(
            "/api/projects/karb-traffic/annotations/ingest",
            json={"algorithm": "kmeans", "version": "v0",
                  "labels": list(LABELS), "rows": rows},
        )
        assert response.status_code == 200
        assert response.json() == {"ingested": 5, "errors": []}

        batch = client.post(
            "/api/projects/karb-traffic/annotations/batch",
            json={"query": {"label": "landing", "annotator": "kmeans:v0"},
                  "label": "landing"},
        )
        assert batch.status_code == 200
        assert batch.json() == {"count": 5}

        export = client.get(
            "/api/projects/karb-traffic/annotations/export?format=csv"
        )
        assert export.status_code == 200
        lines = export.text.splitlines()
        assert lines[0].startswith("subject_id,label,annotator_name")
        assert len(lines) == 6  # header + 5 verified rows (models superseded)

    def test_ingest_reports_row_errors(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, _, _ = upload_synth(client)
        response = client.post(
            "/api/projects/karb-traffic/annotations/ingest",
            json={"algorithm": "kmeans", "version": "v0",
                  "labels": list(LABELS),
                  "rows": [[tracks[0].track_id, "landing"], ["ghost", "landing"]]},
        )
        body = response.json()
        assert body["ingested"] == 1
        assert len(body["errors"]) == 1


class TestPipelineModelsReports:
    def full_project(self, client):
        client.post("/api/projects", json=PROJECT_BODY)
        tracks, truth, _ = upload_synth(client, n_per_behavior=25, seed=10)
        run = client.post("/api/projects/karb-traffic/pipeline/run")
        assert run.status_code == 200, run.text
        return tracks, truth, run.json()

    def test_pipeline_run_summary(self, service):
        _, client = service
        _, _, summary = self.full_project(client)
        assert summary["segments"] == 75
        assert summary["runways"] == ["RW-A", "RW-B"]
        assert summary["sets"] == {"1": 19, "2": 19, "3": 19, "4": 18}

    def test_pipeline_without_tracks_422(self, service):
        _, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        response = client.post("/api/projects/karb-traffic/pipeline/run")
        assert response.status_code == 422

    def test_pipeline_locked_409(self, service):
        store, client = service
        client.post("/api/projects", json=PROJECT_BODY)
        upload_synth(client, n_per_behavior=5)
        project = store.get_project("karb-traffic")
        store.acquire_workflow_lock(project.id, "someone-else")
        response = client.post("/api/projects/karb-traffic/pipeline/run")
        assert response.status_code == 409
        assert response.json()["code"] == "locked"
        store.release_workflow_lock(project.id, "someone-else")

    def test_kmeans_bootstrap_and_effort_flow(self, service):
        store, client = service
        _, truth, _ = self.full_project(client)
        train = client.post(
            "/api/projects/karb-traffic/models/train",
            json={"kind": "kmeans", "version": "v0", "sets": [1]},
        )
        assert train.status_code == 201
        assert train.json()["model"] == "kmeans:v0"

        project = store.get_project("karb-traffic")
        subjects = client.get(
            "/api/projects/karb-traffic/tracks?set=1&annotator=kmeans:v0"
        ).json()["ids"]
        assert len(subjects) == 19

        # verify over HTTP exactly as the UI would: one batch per
        # (runway, label) group, then single corrections
        def oracle(sid):
            seg = store._get_segment(project.id, sid)
            return truth[seg.track_id].behavior

        groups = {}
        for sid in subjects:
            seg = store._get_segment(project.id, sid)
            label = [r.label for r in store.annotations(project.id, sid)][0]
            groups.setdefault((seg.runway_id, label), []).append(sid)
        singles = 0
        for (runway, label), members in sorted(groups.items()):
            response = client.post(
                "/api/projects/karb-traffic/annotations/batch",
                json={"query": {"label": label, "annotator": "kmeans:v0",
                                "runway": runway, "verified": False,
                                "set": 1},
                      "label": label},
            )
            assert response.json()["count"] == len(members)
            for sid in members:
                if oracle(sid) != label:
                    singles += 1
                    client.post("/api/projects/karb-traffic/annotations",
                                json={"subject": sid, "label": oracle(sid)})

        effort = client.get("/api/projects/karb-traffic/reports/effort")
        assert effort.status_code == 200
        lines = effort.text.splitlines()
        assert lines[0] == ("cycle,num_tracks,misclassified,"
                            "annotation_effort,effort_reduction_pct")
        cycle, n, mis, eff, pct = lines[1].split(",")
        assert (cycle, n) == ("1", "19")
        assert int(mis) == singles
        assert int(eff) == singles + len(groups)

    def test_svm_train_metrics_404_then_compute(self, service):
        store, client = service
        _, truth, _ = self.full_project(client)
        project = store.get_project("karb-traffic")

        # truth-label sets 1 and 4 directly (oracle as the human)
        for set_index in (1, 4):
            ids = client.get(
                f"/api/projects/karb-traffic/tracks?set={set_index}"
            ).json()["ids"]
            for sid in ids:
                seg = store._get_segment(project.id, sid)
                client.post("/api/projects/karb-traffic/annotations",
                            json={"subject": sid,
                                  "label": truth[seg.track_id].behavior})

        train = client.post(
            "/api/projects/karb-traffic/models/train",
            json={"kind": "svm", "version": "v1", "sets": [1]},
        )
        assert train.status_code == 201
        metrics = client.get(
            "/api/projects/karb-traffic/models/svm:v1/metrics?set=4"
        )
        assert metrics.status_code == 200
        report = metrics.json()
        assert set(report) >= {"accuracy", "precision", "recall", "f1", "confusion"}
        assert report["accuracy"] > 1.0 / 3.0  # sanity on a tiny fixture

        models = client.get("/api/projects/karb-traffic/models").json()["models"]
        assert "svm:v1" in models

        infer = client.post(
            "/api/projects/karb-traffic/models/svm:v1/infer", json={"set": 2}
        )
        assert infer.status_code == 200
        assert infer.json()["ingested"] == 19

    def test_metrics_unknown_model_404(self, service):
        _, client = service
        self.full_project(client)
        response = client.get(
            "/api/projects/karb-traffic/models/svm:v9/metrics?set=4"
        )
        assert response.status_code == 404


class TestErrorMappingTotality:
    def test_unexpected_error_becomes_internal_code(self, service):
        store, client = service
        client.post("/api/projects", json=PROJECT_BODY)

        def boom(*args, **kwargs):
            raise RuntimeError("wat")

        store.query_tracks = boom
        response = client.get("/api/projects/karb-traffic/tracks")
        assert response.status_code == 500
        assert response.json()["code"] == "internal"

    def test_validation_error_body_shape(self, service):
        _, client = service
        response = client.post("/api/projects", json={"nope": 1})
        assert response.status_code == 422
        body = response.json()
        assert set(body) == {"code", "message"}
