"""Synthetic truth-labeled airport traffic for desk-scale verification.

Each generated track is a waypoint-scripted trajectory for one behavior
(takeoff, landing, or touch-and-go) flown along one of the configured
runways, with Gaussian lateral/vertical/timing noise. The generator emits
its own ground truth per track, which downstream tests use as the oracle
verifier. Profiles are deliberately varied (level-leg lengths, climb and
descent rates spanning the histogram bin edges) so the unsupervised
bootstrap makes a realistic number of mistakes while the classes stay
linearly separable for the supervised model.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geo import GeoPoint, LocalFrame, Track, TrackPoint, from_enu

BEHAVIORS = ("landing", "touch_and_go", "takeoff")


@dataclass(frozen=True)
class RunwayLayout:
    heading_deg: float
    offset_east_m: float = 0.0
    offset_north_m: float = 0.0
    length_m: float = 1000.0


DEFAULT_RUNWAYS = (
    RunwayLayout(heading_deg=60.0, offset_east_m=0.0, offset_north_m=0.0),
    RunwayLayout(heading_deg=150.0, offset_east_m=2500.0, offset_north_m=1200.0),
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_per_behavior: int = 100
    origin: GeoPoint = GeoPoint(40.0, -75.0, 200.0)
    runways: tuple[RunwayLayout, ...] = DEFAULT_RUNWAYS
    lateral_noise_m: float = 8.0
    vertical_noise_m: float = 2.0
    timing_noise_s: float = 0.3
    pattern_alt_m: float = 200.0
    dt_s: float = 4.0
    speed_mps: float = 55.0

    def __post_init__(self):
        if self.n_per_behavior < 1:
            raise ValidationError("n_per_behavior must be positive")
        if min(self.lateral_noise_m, self.vertical_noise_m, self.timing_noise_s) < 0:
            raise ValidationError("noise levels must be non-negative")
        if not self.runways:
            raise ValidationError("at least one runway required")


@dataclass(frozen=True)
class TrackTruth:
    behavior: str
    runway_id: str
    contains_contact: bool
    climbs_out: bool


@dataclass(frozen=True)
class Phase:
    """Constant-velocity straight flight: duration, ground speed, climb rate.

    ``sign`` flips the along-runway direction, which is how out-and-back
    circuit scripts reverse course at an apex.
    """

    duration_s: float
    speed_mps: float
    vr_mps: float
    sign: float = 1.0


def runway_ids(runways: tuple[RunwayLayout, ...]) -> list[str]:
    """Stable ids matching the detector's convention: letters by heading order."""
    order = sorted(
        range(len(runways)),
        key=lambda i: (runways[i].heading_deg % 180.0,
                       runways[i].offset_east_m, runways[i].offset_north_m),
    )
    ids = [""] * len(runways)
    for rank, idx in enumerate(order):
        ids[idx] = f"RW-{chr(ord('A') + rank)}"
    return ids


def _axis_unit(heading_deg: float) -> tuple[float, float]:
    h = math.radians(heading_deg)
    return math.sin(h), math.cos(h)


def _simulate_phases(start_e: float, start_n: float, start_agl: float,
                     heading_deg: float, phases: list[Phase]):
    """Breakpoint trajectory (t, e, n, agl) at phase boundaries."""
    ux, uy = _axis_unit(heading_deg)
    t, e, n, agl = 0.0, start_e, start_n, start_agl
    breakpoints = [(t, e, n, agl)]
    for ph in phases:
        e += ux * ph.sign * ph.speed_mps * ph.duration_s
        n += uy * ph.sign * ph.speed_mps * ph.duration_s
        agl += ph.vr_mps * ph.duration_s
        t += ph.duration_s
        breakpoints.append((t, e, n, agl))
    return breakpoints


def sample_script(track_id: str, t0: float, start_e: float, start_n: float,
                  start_agl: float, heading_deg: float, phases: list[Phase],
                  cfg: SynthConfig, rng: np.random.Generator) -> Track:
    """Sample a phased script at the configured rate and apply noise."""
    bp = np.array(_simulate_phases(start_e, start_n, start_agl, heading_deg, phases))
    total = bp[-1, 0]
    n_samples = int(total / cfg.dt_s) + 1
    times = np.arange(n_samples) * cfg.dt_s
    e = np.interp(times, bp[:, 0], bp[:, 1])
    n = np.interp(times, bp[:, 0], bp[:, 2])
    agl = np.interp(times, bp[:, 0], bp[:, 3])

    if cfg.lateral_noise_m > 0:
        e = e + rng.normal(0.0, cfg.lateral_noise_m, n_samples)
        n = n + rng.normal(0.0, cfg.lateral_noise_m, n_samples)
    if cfg.vertical_noise_m > 0:
        agl = agl + rng.normal(0.0, cfg.vertical_noise_m, n_samples)
    stamps = times + t0
    if cfg.timing_noise_s > 0:
        jitter = np.clip(rng.normal(0.0, cfg.timing_noise_s, n_samples),
                         -cfg.dt_s / 3.0, cfg.dt_s / 3.0)
        stamps = stamps + jitter

    frame = LocalFrame(origin=cfg.origin)
    points = [
        TrackPoint(from_enu(float(e[i]), float(n[i]), float(agl[i]), frame),
                   float(stamps[i]), track_id)
        for i in range(n_samples)
    ]
    return Track(track_id, points)


def _takeoff_phases(rng: np.random.Generator, cfg: SynthConfig) -> list[Phase]:
    v = cfg.speed_mps
    strong = 3.0 * rng.uniform(0.75, 1.2)
    mild = 1.5 * rng.uniform(0.7, 1.3)
    phases = [
        Phase(14.0, 35.0, 0.0),
        Phase(rng.uniform(40.0, 70.0), v, strong),
    ]
    # some departures sag briefly while accelerating before resuming
    if rng.random() < 0.35:
        phases.append(Phase(rng.uniform(12.0, 24.0), v,
                            -rng.uniform(0.6, 1.0)))
    phases.append(Phase(rng.uniform(40.0, 90.0), v, mild))
    phases.append(Phase(120.0, v, mild * rng.uniform(0.9, 1.1)))
    return phases


def _landing_phases(rng: np.random.Generator, cfg: SynthConfig) -> tuple[list[Phase], float]:
    """Returns (phases, start AGL). Descent rates are chosen first and the
    entry altitude follows, capped under the ingest ceiling.

    A fraction of arrivals fly a shallow, draggy approach: mild descent
    rates with long level stretches. Those sit far from the steep-approach
    mode and are the arrivals an unsupervised bootstrap tends to mislabel.
    """
    v = cfg.speed_mps
    flare_dur, flare_vr = 6.0, 0.8
    shallow = rng.random() < 0.3
    if shallow:
        mild = rng.uniform(0.9, 1.4)
        d2 = rng.uniform(150.0, 190.0)
        start_agl = mild * d2 + flare_vr * flare_dur
        phases = [
            Phase(rng.uniform(60.0, 100.0), v, 0.0),
            Phase(d2, v, -mild),
            Phase(flare_dur, 45.0, -flare_vr),
            Phase(12.0, 25.0, 0.0),
        ]
        return phases, start_agl

    strong = 3.0 * rng.uniform(0.9, 1.2)
    mild = 1.5 * rng.uniform(0.7, 1.3)
    d1 = rng.uniform(80.0, 115.0)
    d2 = rng.uniform(20.0, 40.0)
    drop = strong * d1 + mild * d2 + flare_vr * flare_dur
    ceiling = 420.0
    if drop > ceiling:
        scale = (ceiling - flare_vr * flare_dur) / (strong * d1 + mild * d2)
        d1 *= scale
        d2 *= scale
        drop = strong * d1 + mild * d2 + flare_vr * flare_dur
    start_agl = drop
    phases = [
        Phase(rng.uniform(10.0, 40.0), v, 0.0),
        Phase(d1, v, -strong),
        Phase(d2, v, -mild),
        Phase(flare_dur, 45.0, -flare_vr),
        Phase(12.0, 25.0, 0.0),
    ]
    return phases, start_agl


def _touch_and_go_phases(rng: np.random.Generator, cfg: SynthConfig) -> tuple[list[Phase], float]:
    """Returns (phases, entry AGL).

    Descent and climb legs are drawn independently, so the descend/climb
    balance varies widely from circuit to circuit; the climb is flown
    slower than the approach, as in a real pattern.
    """
    v = cfg.speed_mps
    desc_rate = rng.uniform(0.9, 2.9)
    desc_dur = rng.uniform(70.0, 115.0)
    entry_agl = desc_rate * desc_dur
    climb_rate = rng.uniform(2.0, 2.9)
    climb_gain = rng.uniform(165.0, 220.0)
    phases = [
        Phase(rng.uniform(40.0, 70.0), v, 0.0),
        Phase(desc_dur, v, -desc_rate),
        Phase(rng.uniform(14.0, 24.0), 25.0, 0.0),
        Phase(climb_gain / climb_rate, 30.0, climb_rate),
        Phase(rng.uniform(40.0, 70.0), v, 0.0),
    ]
    return phases, entry_agl


def _horizontal_extent(phases: list[Phase]) -> float:
    return sum(ph.speed_mps * ph.duration_s * ph.sign for ph in phases)


def synth_generate(cfg: SynthConfig) -> tuple[list[Track], dict[str, TrackTruth]]:
    """Generate single-behavior tracks plus per-track ground truth.

    Deterministic for a given config: the same seed yields byte-identical
    tracks and truth.
    """
    rng = np.random.default_rng(cfg.seed)
    ids = runway_ids(cfg.runways)
    tracks: list[Track] = []
    truth: dict[str, TrackTruth] = {}
    base_time = 1_700_000_000.0
    counter = 0
    for behavior in BEHAVIORS:
        for _ in range(cfg.n_per_behavior):
            counter += 1
            track_id = f"T{counter:04d}"
            rwy_idx = int(rng.integers(len(cfg.runways)))
            rwy = cfg.runways[rwy_idx]
            sign = 1.0 if rng.random() < 0.5 else -1.0
            ux, uy = _axis_unit(rwy.heading_deg)
            ux, uy = ux * sign, uy * sign
            cx, cy = rwy.offset_east_m, rwy.offset_north_m

            if behavior == "takeoff":
                phases = _takeoff_phases(rng, cfg)
                start_e = cx - ux * rwy.length_m / 2.0
                start_n = cy - uy * rwy.length_m / 2.0
                start_agl = 0.0
                climbs_out = True
            elif behavior == "landing":
                phases, start_agl = _landing_phases(rng, cfg)
                # position so the flare ends at 35% of the runway length
                touchdown = rwy.length_m * (0.35 - 0.5)
                dist_to_touch = sum(
                    ph.speed_mps * ph.duration_s for ph in phases[:-1]
                )
                start_e = cx + ux * (touchdown - dist_to_touch)
                start_n = cy + uy * (touchdown - dist_to_touch)
                climbs_out = False
            else:
                phases, start_agl = _touch_and_go_phases(rng, cfg)
                touchdown = rwy.length_m * (0.3 - 0.5)
                dist_to_touch = sum(
                    ph.speed_mps * ph.duration_s for ph in phases[:2]
                )
                start_e = cx + ux * (touchdown - dist_to_touch)
                start_n = cy + uy * (touchdown - dist_to_touch)
                climbs_out = True

            signed = [Phase(p.duration_s, p.speed_mps, p.vr_mps, sign) for p in phases]
            track = sample_script(
                track_id, base_time + counter * 3600.0,
                start_e, start_n, start_agl, rwy.heading_deg, signed, cfg, rng,
            )
            tracks.append(track)
            truth[track_id] = TrackTruth(
                behavior=behavior,
                runway_id=ids[rwy_idx],
                contains_contact=True,
                climbs_out=climbs_out,
            )
    return tracks, truth


def composite_circuit_track(cfg: SynthConfig, track_id: str = "C0001",
                            runway_index: int = 0,
                            noise: bool = False) -> tuple[Track, list[str]]:
    """One track that takes off, flies a touch-and-go, and lands.

    Out-and-back legs along the runway axis keep the whole circuit inside
    the analysis zone. Returns the track and the expected behavior labels
    of its segments in order.
    """
    rwy = cfg.runways[runway_index]
    apex = cfg.pattern_alt_m
    climb_rate, desc_rate, v = 3.0, 3.0, 40.0
    leg = apex / climb_rate   # seconds to reach the apex
    phases = [
        Phase(20.0, 25.0, 0.0, 1.0),             # ground roll
        Phase(leg, v, climb_rate, 1.0),          # climb out to apex 1
        Phase(leg, v, -desc_rate, -1.0),         # back: descend to touch
        Phase(12.0, 25.0, 0.0, -1.0),            # touch-and-go roll
        Phase(leg, v, climb_rate, -1.0),         # climb out to apex 2
        Phase(leg, v, -desc_rate, 1.0),          # back: final descent
        Phase(14.0, 25.0, 0.0, 1.0),             # landing rollout
    ]
    start_e = rwy.offset_east_m - _axis_unit(rwy.heading_deg)[0] * rwy.length_m * 0.45
    start_n = rwy.offset_north_m - _axis_unit(rwy.heading_deg)[1] * rwy.length_m * 0.45
    quiet = cfg if noise else SynthConfig(
        seed=cfg.seed, n_per_behavior=cfg.n_per_behavior, origin=cfg.origin,
        runways=cfg.runways, lateral_noise_m=0.0, vertical_noise_m=0.0,
        timing_noise_s=0.0, pattern_alt_m=cfg.pattern_alt_m, dt_s=cfg.dt_s,
        speed_mps=cfg.speed_mps,
    )
    rng = np.random.default_rng(cfg.seed)
    track = sample_script(track_id, 1_700_000_000.0, start_e, start_n, 0.0,
                          rwy.heading_deg, phases, quiet, rng)
    return track, ["takeoff", "touch_and_go", "landing"]


def truth_to_csv(truth: dict[str, TrackTruth]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["track_id", "behavior", "runway_id",
                     "contains_contact", "climbs_out"])
    for track_id in sorted(truth):
        t = truth[track_id]
        writer.writerow([track_id, t.behavior, t.runway_id,
                         "true" if t.contains_contact else "false",
                         "true" if t.climbs_out else "false"])
    return out.getvalue()


def truth_from_csv(text: str) -> dict[str, TrackTruth]:
    reader = csv.DictReader(io.StringIO(text))
    truth = {}
    for row in reader:
        truth[row["track_id"]] = TrackTruth(
            behavior=row["behavior"],
            runway_id=row["runway_id"],
            contains_contact=row["contains_contact"] == "true",
            climbs_out=row["climbs_out"] == "true",
        )
    return truth
