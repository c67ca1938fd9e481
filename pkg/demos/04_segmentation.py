"""Single-behavior segmentation of a multi-maneuver flight.

One aircraft takes off, flies a touch-and-go, and lands. Cutting at the
altitude apexes between ground-contact groups keeps each maneuver in one
piece: splitting at the touch itself would slice a touch-and-go into a
landing-like half and a takeoff-like half.
"""
from annotrack.geo import GeoPoint, LocalFrame, from_enu, to_enu
from annotrack.pipeline import PipelineConfig, Runway, build_segments
from annotrack.synth import SynthConfig, composite_circuit_track

airport = GeoPoint(40.0, -75.0, 200.0)
synth_cfg = SynthConfig(seed=0, origin=airport, pattern_alt_m=200.0)
track, expected = composite_circuit_track(synth_cfg, noise=False)
print(f"one circuit track: {len(track.points)} points, "
      f"expected maneuvers {expected}")

frame = LocalFrame(origin=airport)
layout = synth_cfg.runways[0]
runway = Runway(
    id="RW-A",
    centroid=from_enu(layout.offset_east_m, layout.offset_north_m, 0.0, frame),
    heading_deg=layout.heading_deg,
    length_m=layout.length_m,
)
cfg = PipelineConfig()
segments = build_segments(track, airport, [runway], cfg)

print(f"\nsegments: {len(segments)}")
for seg, label in zip(segments, expected):
    s, e = seg.point_range
    agl = [p.geo.altitude_m - airport.altitude_m for p in track.points[s:e]]
    print(f"  {seg.segment_id}: points [{s:3d},{e:3d})  "
          f"agl {agl[0]:5.1f} -> {max(agl):5.1f} -> {agl[-1]:5.1f}  "
          f"contact={seg.contains_contact} climbs_out={seg.climbs_out}  "
          f"runway={seg.runway_id}  ({label})")

print("\nfeature vectors (descend | level | climb mass):")
for seg, label in zip(segments, expected):
    f = seg.feature
    print(f"  {label:>12}: descend {f[0]+f[1]:.2f}  level {f[2]:.2f}  "
          f"climb {f[3]+f[4]:.2f}")
