"""Serve the synthetic demo fixture for frontend integration tests.

Builds a project with 120 synthetic tracks, runs the pipeline and the
first two verification cycles, and leaves set 3 pre-labeled but
unverified so the UI has real verification work to do. Credentials:
uiuser / uipass.
"""
import sys

import uvicorn

from annotrack.api.app import create_app
from annotrack.api.auth import AuthManager
from annotrack.geo import GeoPoint
from annotrack.ingest import LabelSetDescriptor
from annotrack.store.memory import MemoryStore
from annotrack.synth import SynthConfig, synth_generate
from annotrack.workflow import WorkflowRunner

LABELS = ("landing", "touch_and_go", "takeoff")
AIRPORT = {"latitude_deg": 40.0, "longitude_deg": -75.0, "elevation_m": 200.0}


def build_store() -> MemoryStore:
    cfg = SynthConfig(seed=42, n_per_behavior=40,
                      origin=GeoPoint(40.0, -75.0, 200.0))
    tracks, truth = synth_generate(cfg)
    store = MemoryStore()
    project = store.create_project(
        "karb-traffic", LabelSetDescriptor("karb-traffic", LABELS), {
            "airport": AIRPORT,
            "pipeline": {"seed": 3},
            "ml": {"lambda": 1e-3, "epochs": 500, "seed": 7},
            "split": {"n_sets": 4, "seed": 2, "validation_set": 4},
        },
    )
    store.upsert_tracks(project.id, tracks)

    runner = WorkflowRunner(store, "karb-traffic")
    runner.run_pipeline()
    oracle = runner.truth_oracle(truth)
    verifier = runner.register_verifier("verifier")
    runner.annotate_truth(4, oracle, verifier)
    runner.bootstrap_cycle(1)
    runner.verify_cycle(1, oracle, verifier, model_ref="kmeans:v0")
    runner.evaluate_on("kmeans:v0", 4)
    runner.train_cycle([1], "v1")
    runner.evaluate_on("svm:v1", 4)
    runner.infer_cycle("svm:v1", 2)
    runner.verify_cycle(2, oracle, verifier, model_ref="svm:v1")
    runner.train_cycle([1, 2], "v2")
    runner.evaluate_on("svm:v2", 4)
    # set 3 stays pre-labeled but unverified: the UI's job
    runner.infer_cycle("svm:v2", 3)
    return store


def main() -> int:
    port = int(sys.argv[1]) if len(sys.argv) > 1 else 8123
    store = build_store()
    auth = AuthManager([
        {"username": "uiuser", "password": "uipass", "role": "verifier"},
    ])
    app = create_app(store, auth)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
