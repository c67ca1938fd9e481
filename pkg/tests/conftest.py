import numpy as np
import pytest

from annotrack.geo import GeoPoint, Track, TrackPoint
from annotrack.ingest import LabelSetDescriptor
from annotrack.store.memory import MemoryStore
from annotrack.store.sql import SqlStore

LABELS = ("landing", "touch_and_go", "takeoff")


def make_track(track_id, rows):
    """rows: (timestamp, lat, lon, alt) tuples."""
    return Track(track_id, [
        TrackPoint(GeoPoint(lat, lon, alt), ts, track_id)
        for ts, lat, lon, alt in rows
    ])


def straight_track(track_id, n=5, lat0=40.0, lon0=-75.0, alt=100.0, t0=0.0,
                   dlat=0.001, dlon=0.0, dalt=0.0, dt=10.0):
    return make_track(track_id, [
        (t0 + i * dt, lat0 + i * dlat, lon0 + i * dlon, alt + i * dalt)
        for i in range(n)
    ])


@pytest.fixture(params=["memory", "sqlite"])
def store(request):
    if request.param == "memory":
        s = MemoryStore()
    else:
        s = SqlStore("sqlite://")
    yield s
    s.close()


@pytest.fixture
def project(store):
    return store.create_project(
        "proj", LabelSetDescriptor("proj", LABELS), {}
    )


@pytest.fixture
def human(store):
    return store.register_annotator("human", "u1", role="annotator")


def rng(seed=0):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, title, status, elapsed in sorted(RESULTS):
        terminalreporter.write_line(
            f"ACCEPTANCE {number} ({title}): {status} [{elapsed:.2f}s]"
        )
