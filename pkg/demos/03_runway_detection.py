"""Runway detection from near-ground track positions.

Ground rolls, touches, and rollouts trace the runway lines; clustering the
near-ground points and taking each cluster's principal component recovers
centerline heading (mod 180) and extent without any airport database.
"""
from annotrack.geo import GeoPoint
from annotrack.pipeline import PipelineConfig, detect_runways
from annotrack.synth import RunwayLayout, SynthConfig, synth_generate

airport = GeoPoint(40.0, -75.0, 200.0)
layout = (
    RunwayLayout(heading_deg=60.0, offset_east_m=0.0, offset_north_m=0.0),
    RunwayLayout(heading_deg=150.0, offset_east_m=2500.0, offset_north_m=1200.0),
)
cfg = SynthConfig(seed=5, n_per_behavior=40, origin=airport, runways=layout)
tracks, _ = synth_generate(cfg)
print(f"generated {len(tracks)} tracks, "
      f"{sum(len(t.points) for t in tracks)} position reports")

pipeline_cfg = PipelineConfig(n_runways=2, seed=1)
runways = detect_runways(tracks, airport, pipeline_cfg)
print("\ndetected runways (true headings: 60 and 150):")
for runway in runways:
    print(f"  {runway.id}: heading {runway.heading_deg:6.2f} deg, "
          f"length {runway.length_m:6.0f} m, "
          f"centroid ({runway.centroid.latitude_deg:.4f}, "
          f"{runway.centroid.longitude_deg:.4f})")

print("\nheading is reported mod 180: both operating directions are one runway")
