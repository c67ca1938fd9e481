"""Track preprocessing: runway detection, segmentation, and features.

Runways are recovered from near-ground track positions by clustering them
spatially and taking the principal component of each cluster as the
centerline. Tracks are segmented inside a radius around the airport so
that each segment carries a single behavior; the split points are the
altitude apexes between ground-contact events, which keeps a touch-and-go
(descend, touch, climb) in one piece instead of cutting it at the runway.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedDirectionError, ValidationError
from .geo import (
    GeoPoint,
    LocalFrame,
    Track,
    angular_distance_mod180,
    enu_bearing_deg,
    from_enu,
    to_enu,
)


@dataclass(frozen=True)
class Runway:
    """A detected centerline: centroid, heading (mod 180), and extent."""

    id: str
    centroid: GeoPoint
    heading_deg: float
    length_m: float

    def __post_init__(self):
        if not (0.0 <= self.heading_deg < 180.0):
            raise ValidationError(f"runway heading must be in [0,180): {self.heading_deg}")
        if self.length_m <= 0:
            raise ValidationError("runway length must be positive")


@dataclass(frozen=True)
class ContactEvent:
    """A near-ground point on a runway (wheel contact or ground roll)."""

    track_id: str
    point_index: int
    position: GeoPoint
    runway_id: str | None = None


@dataclass
class TrackSegment:
    """A contiguous slice of a track carrying one coherent behavior.

    ``point_range`` is half-open over the parent track's point indexes.
    """

    segment_id: str
    track_id: str
    point_range: tuple[int, int]
    avg_direction_deg: float | None = None
    runway_id: str | None = None
    feature: tuple[float, ...] | None = None
    contains_contact: bool = False
    climbs_out: bool = False

    def __post_init__(self):
        start, end = self.point_range
        if end <= start:
            raise ValidationError("segment point_range must be non-empty")

    @property
    def num_points(self) -> int:
        return self.point_range[1] - self.point_range[0]


@dataclass(frozen=True)
class PipelineConfig:
    zone_radius_m: float = 8000.0
    contact_agl_m: float = 15.0
    pattern_alt_agl_m: float = 150.0
    n_runways: int = 2
    histogram_edges_mps: tuple[float, ...] = (-2.5, -0.5, 0.5, 2.5)
    contact_lateral_gate_m: float = 500.0
    seed: int = 0

    def __post_init__(self):
        edges = tuple(self.histogram_edges_mps)
        if len(edges) != 4 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValidationError(
                "histogram_edges_mps must be 4 strictly increasing values (5 bins)"
            )
        object.__setattr__(self, "histogram_edges_mps", edges)
        if self.n_runways < 1:
            raise ValidationError("n_runways must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown pipeline config keys: {sorted(unknown)}")
        if "histogram_edges_mps" in doc:
            doc = {**doc, "histogram_edges_mps": tuple(doc["histogram_edges_mps"])}
        return cls(**doc)


def _enu_array(track: Track, frame: LocalFrame) -> np.ndarray:
    return np.array([to_enu(p.geo, frame) for p in track.points], dtype=float)


def _kmeans_plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted seeding; standard k-means++ choice of initial centers."""
    n = len(points)
    centers = [points[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centers)


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int = 100,
           tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd iterations; empty clusters keep their previous centroid."""
    centroids = centroids.astype(float).copy()
    assign = np.zeros(len(points), dtype=int)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new = centroids.copy()
        for j in range(len(centroids)):
            members = points[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = np.max(np.linalg.norm(new - centroids, axis=1))
        centroids = new
        if shift < tol:
            break
    return centroids, assign


def detect_runways(tracks: list[Track], airport_ref: GeoPoint,
                   cfg: PipelineConfig) -> list[Runway]:
    """Recover runway centerlines from near-ground positions.

    Points at or below the contact threshold (and inside the analysis zone)
    are clustered into ``n_runways`` spatial groups with seeded k-means on
    their east/north coordinates; each group's first principal component
    gives the centerline heading (mod 180) and extent.
    """
    frame = LocalFrame(origin=airport_ref)
    ground = []
    altitudes = []
    for track in tracks:
        for p in track.points:
            agl = p.geo.altitude_m - airport_ref.altitude_m
            if agl > cfg.contact_agl_m:
                continue
            e, n, _ = to_enu(p.geo, frame)
            if e * e + n * n <= cfg.zone_radius_m ** 2:
                ground.append((e, n))
                altitudes.append(p.geo.altitude_m)
    if len(ground) < cfg.n_runways:
        raise ValidationError(
            f"only {len(ground)} ground points for {cfg.n_runways} runways"
        )
    points = np.array(ground)
    alts = np.array(altitudes)
    rng = np.random.default_rng(cfg.seed)
    if cfg.n_runways == 1:
        assign = np.zeros(len(points), dtype=int)
    else:
        init = _kmeans_plus_plus_init(points, cfg.n_runways, rng)
        _, assign = _lloyd(points, init)

    detected = []
    for j in range(cfg.n_runways):
        cluster = points[assign == j]
        if len(cluster) < 2:
            raise ValidationError(f"runway cluster {j} has fewer than 2 points")
        mean = cluster.mean(axis=0)
        centered = cluster - mean
        cov = centered.T @ centered / (len(cluster) - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        axis = eigvecs[:, -1]  # largest eigenvalue
        heading = enu_bearing_deg(axis[0], axis[1]) % 180.0
        proj = centered @ axis
        length = float(proj.max() - proj.min())
        if length <= 0:
            raise ValidationError(f"runway cluster {j} is degenerate (zero extent)")
        centroid = from_enu(mean[0], mean[1],
                            float(alts[assign == j].mean()) - airport_ref.altitude_m,
                            frame)
        detected.append((heading, mean[0], mean[1], centroid, length))

    detected.sort(key=lambda r: (r[0], r[1], r[2]))
    return [
        Runway(id=f"RW-{chr(ord('A') + i)}", centroid=c, heading_deg=h, length_m=l)
        for i, (h, _, _, c, l) in enumerate(detected)
    ]


def _centerline_distance_m(e: float, n: float, runway: Runway,
                           frame: LocalFrame) -> float:
    """Distance from an ENU point to the runway's finite centerline segment."""
    ce, cn, _ = to_enu(runway.centroid, frame)
    h = np.radians(runway.heading_deg)
    ux, uy = np.sin(h), np.cos(h)
    half = runway.length_m / 2.0
    t = (e - ce) * ux + (n - cn) * uy
    t = max(-half, min(half, t))
    dx = e - (ce + t * ux)
    dy = n - (cn + t * uy)
    return float(np.hypot(dx, dy))


def _contact_flags(track: Track, enu: np.ndarray, agl: np.ndarray,
                   runways: list[Runway], frame: LocalFrame,
                   cfg: PipelineConfig) -> list[str | None]:
    """Per point: the nearest runway id if this is a contact point, else None."""
    flags: list[str | None] = [None] * len(track.points)
    if not runways:
        return flags
    for i in range(len(track.points)):
        if agl[i] > cfg.contact_agl_m:
            continue
        best_id, best_d = None, None
        for runway in runways:
            d = _centerline_distance_m(enu[i, 0], enu[i, 1], runway, frame)
            if best_d is None or d < best_d:
                best_id, best_d = runway.id, d
        if best_d is not None and best_d <= cfg.contact_lateral_gate_m:
            flags[i] = best_id
    return flags


def contact_events(track: Track, airport_ref: GeoPoint, runways: list[Runway],
                   cfg: PipelineConfig) -> list[ContactEvent]:
    frame = LocalFrame(origin=airport_ref)
    enu = _enu_array(track, frame)
    agl = np.array([p.geo.altitude_m - airport_ref.altitude_m for p in track.points])
    flags = _contact_flags(track, enu, agl, runways, frame, cfg)
    return [
        ContactEvent(track.track_id, i, track.points[i].geo, runway_id=flag)
        for i, flag in enumerate(flags)
        if flag is not None
    ]


def segment_track(track: Track, airport_ref: GeoPoint, runways: list[Runway],
                  cfg: PipelineConfig) -> list[TrackSegment]:
    """Cut the in-zone parts of a track into single-behavior segments.

    Within each maximal run of points inside the zone radius, boundaries sit
    at the run ends and at the altitude apex between each pair of successive
    contact groups, provided the apex clears the pattern altitude. A cut
    that would leave a piece shorter than 2 points is skipped.
    """
    if len(track.points) < 2:
        return []
    frame = LocalFrame(origin=airport_ref)
    enu = _enu_array(track, frame)
    agl = np.array([p.geo.altitude_m - airport_ref.altitude_m for p in track.points])
    in_zone = (enu[:, 0] ** 2 + enu[:, 1] ** 2) <= cfg.zone_radius_m ** 2
    contact = _contact_flags(track, enu, agl, runways, frame, cfg)

    segments: list[TrackSegment] = []
    ordinal = 0
    run_start = None
    for i, flag in enumerate(list(in_zone) + [False]):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            if i - run_start >= 2:
                ordinal = _segment_run(track, run_start, i, agl, enu, contact,
                                       cfg, segments, ordinal)
            run_start = None
    return segments


def _segment_run(track: Track, start: int, end: int, agl: np.ndarray,
                 enu: np.ndarray, contact: list[str | None], cfg: PipelineConfig,
                 out: list[TrackSegment], ordinal: int) -> int:
    contact_idx = [i for i in range(start, end) if contact[i] is not None]
    cuts = []
    for a, b in zip(contact_idx, contact_idx[1:]):
        if b - a < 2:
            continue
        between = np.arange(a + 1, b)
        apex = int(between[np.argmax(agl[between])])
        if agl[apex] > cfg.pattern_alt_agl_m:
            cuts.append(apex)

    boundaries = [start]
    for cut in cuts:
        if cut - boundaries[-1] >= 2 and end - cut >= 2:
            boundaries.append(cut)
    boundaries.append(end)

    for s, e in zip(boundaries, boundaries[1:]):
        ordinal += 1
        seg = TrackSegment(
            segment_id=f"{track.track_id}__s{ordinal}",
            track_id=track.track_id,
            point_range=(s, e),
        )
        seg_contacts = [i for i in contact_idx if s <= i < e]
        seg.contains_contact = bool(seg_contacts)
        tail_from = seg_contacts[-1] if seg_contacts else s
        tail = agl[tail_from:e]
        seg.climbs_out = bool(tail[-1] - tail.min() > cfg.pattern_alt_agl_m)
        try:
            seg.avg_direction_deg = _net_direction(enu, s, e)
        except UndefinedDirectionError:
            seg.avg_direction_deg = None
        out.append(seg)
    return ordinal


def _net_direction(enu: np.ndarray, start: int, end: int) -> float:
    displacements = np.diff(enu[start:end, :2], axis=0)
    net = displacements.sum(axis=0)
    if abs(net[0]) < 1e-12 and abs(net[1]) < 1e-12:
        raise UndefinedDirectionError("zero net displacement over segment")
    return enu_bearing_deg(float(net[0]), float(net[1]))


def average_direction(segment: TrackSegment, track: Track,
                      airport_ref: GeoPoint) -> float:
    """Bearing of the summed point-to-point displacement over the segment."""
    start, end = segment.point_range
    if end - start < 2:
        raise ValidationError("segment needs at least 2 points")
    frame = LocalFrame(origin=airport_ref)
    enu = _enu_array(track, frame)
    return _net_direction(enu, start, end)


def assign_runway(segment: TrackSegment, runways: list[Runway]) -> str:
    """Nearest runway by mod-180 angular distance to the segment direction."""
    if not runways:
        raise ValidationError("no runways to assign")
    if segment.avg_direction_deg is None:
        raise UndefinedDirectionError(
            f"segment {segment.segment_id} has no defined direction"
        )
    best_id, best_d = None, None
    for runway in sorted(runways, key=lambda r: r.id):
        d = angular_distance_mod180(segment.avg_direction_deg, runway.heading_deg)
        if best_d is None or d < best_d:
            best_id, best_d = runway.id, d
    return best_id


def vertical_rate_histogram(segment: TrackSegment, track: Track,
                            cfg: PipelineConfig) -> tuple[float, ...]:
    """Normalized 5-bin histogram of point-to-point vertical velocities.

    Bins are half-open [lo, hi) on the configured edges, with bin 0 open
    below the first edge and bin 4 closed above the last. Pairs with zero
    time separation are skipped.
    """
    start, end = segment.point_range
    points = track.points[start:end]
    if len(points) < 2:
        raise ValidationError("segment needs at least 2 points for a histogram")
    rates = []
    for p1, p2 in zip(points, points[1:]):
        dt = p2.timestamp_s - p1.timestamp_s
        if dt <= 0:
            continue
        rates.append((p2.geo.altitude_m - p1.geo.altitude_m) / dt)
    if not rates:
        raise ValidationError("segment has no positive-duration point pairs")
    edges = np.array(cfg.histogram_edges_mps)
    bins = np.searchsorted(edges, np.array(rates), side="right")
    counts = np.bincount(bins, minlength=5).astype(float)
    return tuple(counts / counts.sum())


def build_segments(track: Track, airport_ref: GeoPoint, runways: list[Runway],
                   cfg: PipelineConfig) -> list[TrackSegment]:
    """Segment a track and fill in runway assignment and histogram feature."""
    segments = segment_track(track, airport_ref, runways, cfg)
    for seg in segments:
        if runways and seg.avg_direction_deg is not None:
            seg.runway_id = assign_runway(seg, runways)
        seg.feature = vertical_rate_histogram(seg, track, cfg)
    return segments
