"""The annotation store: attribution, verification, queries, and export.

Model pre-labels and human annotations coexist per subject until a human
passes judgment; queries are conjunctions over labels, annotators, the
verified flag, runways, and geometry; exports carry full attribution for
downstream training.
"""
from annotrack.ingest import ExternalAnnotation, LabelSetDescriptor
from annotrack.store.memory import MemoryStore
from annotrack.store.types import Query
from annotrack.geo import GeoPoint, Track, TrackPoint

labels = ("landing", "touch_and_go", "takeoff")
store = MemoryStore()
project = store.create_project("demo", LabelSetDescriptor("demo", labels), {})


def track(track_id, lat0):
    points = [
        TrackPoint(GeoPoint(lat0 + 0.001 * i, -75.0, 300.0), i * 10.0, track_id)
        for i in range(4)
    ]
    return Track(track_id, points)


store.upsert_tracks(project.id, [track(f"T{i}", 40.0 + 0.02 * i) for i in range(6)])
print(f"stored {len(store.track_ids(project.id))} tracks")

print("\n== a model pre-labels, unverified ==")
count, errors = store.ingest_annotations(project.id, [
    ExternalAnnotation(f"T{i}", "landing" if i < 4 else "takeoff", "kmeans:v0")
    for i in range(6)
])
print(f"ingested {count} pre-labels from kmeans:v0, errors: {errors}")
print("unverified landings:", store.query_tracks(
    project.id, Query(label="landing", annotator="kmeans:v0", verified=False)))

print("\n== a human verifies in one batch, then corrects one ==")
human = store.register_annotator("human", "alice", role="annotator")
n = store.batch_annotate(
    project.id, Query(label="landing", annotator="kmeans:v0"), "landing", human)
print(f"batch verified {n} subjects")
store.annotate(project.id, "T3", "touch_and_go", human)  # T3 was mislabeled
print("still unverified from the model:", store.query_tracks(
    project.id, Query(annotator="kmeans:v0", verified=False)))
print("verified touch_and_go:", store.query_tracks(
    project.id, Query(label="touch_and_go", verified=True)))

print("\n== per-track bookkeeping ==")
detail = store.get_track(project.id, "T3")
print(f"T3: {detail.meta.num_points} points, "
      f"{detail.meta.num_annotations} current annotation(s), "
      f"label {detail.annotations[0].label!r}")

print("\n== export for training ==")
print(store.export_annotations(project.id, "csv").decode())
