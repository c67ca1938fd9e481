"""Geodesy primitives and the vertical-rate histogram feature.

Shows the local ENU projection, great-circle distances, bidirectional
heading comparison, and how a climb/descend profile turns into the 5-bin
feature vector used for behavior classification.
"""
import numpy as np

from annotrack.geo import (
    GeoPoint, LocalFrame, Track, TrackPoint,
    to_enu, from_enu, haversine_distance_m, bearing_deg,
    angular_distance_mod180,
)
from annotrack.pipeline import PipelineConfig, TrackSegment, vertical_rate_histogram

airport = GeoPoint(40.0, -75.0, 200.0)
frame = LocalFrame(origin=airport)

print("== local ENU frame ==")
p = GeoPoint(40.01, -74.99, 350.0)
e, n, u = to_enu(p, frame)
print(f"point 0.01N 0.01E of the field -> east {e:.1f} m, north {n:.1f} m, up {u:.1f} m")
back = from_enu(e, n, u, frame)
print(f"round trip error: {haversine_distance_m(p, back):.2e} m")

print("\n== distances and bearings ==")
print(f"1 degree of latitude: {haversine_distance_m(GeoPoint(0,0), GeoPoint(1,0))/1000:.1f} km")
print(f"bearing to the northeast point: {bearing_deg(airport, p):.1f} deg")

print("\n== runway headings are bidirectional ==")
for a, b in [(60, 240), (60, 150), (350, 10)]:
    print(f"angular_distance_mod180({a:3d}, {b:3d}) = {angular_distance_mod180(a, b):.0f} deg")

print("\n== vertical-rate histogram ==")
# a touch-and-go-like profile: descend at -1.5 m/s, roll, climb at +2.5 m/s
alts, t, vr_script = [], 0.0, [(-1.5, 20), (0.0, 4), (2.5, 16)]
alt = 120.0
rows = []
for vr, steps in vr_script:
    for _ in range(steps):
        rows.append(TrackPoint(GeoPoint(40.0, -75.0, alt + 200.0), t, "demo"))
        alt += vr * 4.0
        t += 4.0
track = Track("demo", rows)
cfg = PipelineConfig()
seg = TrackSegment("demo__s1", "demo", (0, len(rows)))
hist = vertical_rate_histogram(seg, track, cfg)
labels = ["<-2.5", "[-2.5,-0.5)", "[-0.5,0.5)", "[0.5,2.5)", ">=2.5"]
for name, h in zip(labels, hist):
    bar = "#" * int(h * 40)
    print(f"  {name:>12} m/s: {h:.2f} {bar}")
print("mass on both the descend and climb sides marks a touch-and-go")
