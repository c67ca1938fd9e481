"""Geodesy and kinematics primitives shared by all track computations.

All functions assume a spherical earth of radius EARTH_RADIUS_M and a local
equirectangular projection for the east/north/up frame. Both choices are
accurate to well under a meter over the few-kilometer extents this library
works at, and keep every computation dependent on a single constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UndefinedDirectionError, ValidationError

EARTH_RADIUS_M = 6_371_000.0

METERS_PER_NM = 1852.0
METERS_PER_FOOT = 0.3048


@dataclass(frozen=True)
class GeoPoint:
    """A geodetic position: degrees latitude/longitude, meters above MSL."""

    latitude_deg: float
    longitude_deg: float
    altitude_m: float = 0.0

    def __post_init__(self):
        if not (-90.0 <= self.latitude_deg <= 90.0):
            raise ValidationError(f"latitude out of range: {self.latitude_deg}")
        if not (-180.0 <= self.longitude_deg < 180.0):
            raise ValidationError(f"longitude out of range: {self.longitude_deg}")
        if not math.isfinite(self.altitude_m):
            raise ValidationError("altitude must be finite")


@dataclass(frozen=True)
class TrackPoint:
    """One timestamped position belonging to a track."""

    geo: GeoPoint
    timestamp_s: float
    track_id: str

    def __post_init__(self):
        if not math.isfinite(self.timestamp_s):
            raise ValidationError("timestamp must be finite")
        if not self.track_id:
            raise ValidationError("track_id must be non-empty")


@dataclass
class Track:
    """A temporally ordered position sequence for one vehicle.

    ``extras`` holds per-point named columns carried through ingest verbatim;
    each value list is aligned with ``points``.
    """

    track_id: str
    points: list[TrackPoint]
    extras: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        for p in self.points:
            if p.track_id != self.track_id:
                raise ValidationError(
                    f"point track_id {p.track_id!r} != track {self.track_id!r}"
                )
        times = [p.timestamp_s for p in self.points]
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValidationError(f"track {self.track_id}: timestamps not sorted")
        for name, col in self.extras.items():
            if len(col) != len(self.points):
                raise ValidationError(f"extra column {name!r} length mismatch")

    def __len__(self):
        return len(self.points)

    @property
    def start_time(self) -> float:
        return self.points[0].timestamp_s

    @property
    def end_time(self) -> float:
        return self.points[-1].timestamp_s

    def slice(self, start: int, end: int, track_id: str | None = None) -> "Track":
        """Sub-track over point indexes [start, end); extras come along."""
        tid = track_id if track_id is not None else self.track_id
        pts = [
            TrackPoint(p.geo, p.timestamp_s, tid) for p in self.points[start:end]
        ]
        extras = {k: list(v[start:end]) for k, v in self.extras.items()}
        return Track(tid, pts, extras)


@dataclass(frozen=True)
class LocalFrame:
    """A local east/north/up frame anchored at an airport reference point."""

    origin: GeoPoint
    origin_elevation_m: float | None = None

    @property
    def elevation_m(self) -> float:
        if self.origin_elevation_m is not None:
            return self.origin_elevation_m
        return self.origin.altitude_m


def to_enu(p: GeoPoint, frame: LocalFrame) -> tuple[float, float, float]:
    """Project a point into the frame's east/north/up coordinates (meters).

    Equirectangular: east = R*cos(lat0)*dlon, north = R*dlat,
    up = altitude difference from the frame origin.
    """
    lat0 = math.radians(frame.origin.latitude_deg)
    dlat = math.radians(p.latitude_deg - frame.origin.latitude_deg)
    dlon = math.radians(p.longitude_deg - frame.origin.longitude_deg)
    east = EARTH_RADIUS_M * math.cos(lat0) * dlon
    north = EARTH_RADIUS_M * dlat
    up = p.altitude_m - frame.origin.altitude_m
    return east, north, up


def from_enu(
    east: float, north: float, up: float, frame: LocalFrame
) -> GeoPoint:
    """Inverse of :func:`to_enu` (exact inverse of the same projection)."""
    lat0 = math.radians(frame.origin.latitude_deg)
    lat = frame.origin.latitude_deg + math.degrees(north / EARTH_RADIUS_M)
    lon = frame.origin.longitude_deg + math.degrees(
        east / (EARTH_RADIUS_M * math.cos(lat0))
    )
    # Keep longitude in [-180, 180) for round trips near the antimeridian.
    lon = (lon + 180.0) % 360.0 - 180.0
    return GeoPoint(lat, lon, frame.origin.altitude_m + up)


def haversine_distance_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    p1 = math.radians(a.latitude_deg)
    p2 = math.radians(b.latitude_deg)
    dphi = math.radians(b.latitude_deg - a.latitude_deg)
    dlam = math.radians(b.longitude_deg - a.longitude_deg)
    h = (
        math.sin(dphi / 2.0) ** 2
        + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def bearing_deg(origin: GeoPoint, target: GeoPoint) -> float:
    """Initial great-circle bearing from origin to target, [0, 360).

    0 = north, 90 = east. Raises UndefinedDirectionError when the two
    points coincide horizontally.
    """
    if (
        origin.latitude_deg == target.latitude_deg
        and origin.longitude_deg == target.longitude_deg
    ):
        raise UndefinedDirectionError("coincident horizontal positions")
    p1 = math.radians(origin.latitude_deg)
    p2 = math.radians(target.latitude_deg)
    dlam = math.radians(target.longitude_deg - origin.longitude_deg)
    x = math.sin(dlam) * math.cos(p2)
    y = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dlam)
    return math.degrees(math.atan2(x, y)) % 360.0


def enu_bearing_deg(east: float, north: float) -> float:
    """Bearing of a planar east/north displacement, [0, 360)."""
    if east == 0.0 and north == 0.0:
        raise UndefinedDirectionError("zero displacement")
    return math.degrees(math.atan2(east, north)) % 360.0


def angular_distance_mod180(a_deg: float, b_deg: float) -> float:
    """Angle in [0, 90] between two bidirectional headings.

    Headings theta and theta+180 are identified (runways are used in both
    directions), so the largest possible separation is 90 degrees.
    """
    if not (math.isfinite(a_deg) and math.isfinite(b_deg)):
        raise ValidationError("angles must be finite")
    d = abs(a_deg - b_deg) % 180.0
    return min(d, 180.0 - d)


def vertical_rate_mps(p1: TrackPoint, p2: TrackPoint) -> float:
    """Vertical velocity from differencing two sequential positions, m/s."""
    dt = p2.timestamp_s - p1.timestamp_s
    if dt <= 0:
        raise ValidationError(f"non-increasing timestamps: dt={dt}")
    return (p2.geo.altitude_m - p1.geo.altitude_m) / dt
