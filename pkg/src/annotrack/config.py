"""Service/CLI configuration: one YAML file describes storage, auth,
the project (labels, airport, filter), and all pipeline/ml/split/synth
parameters, so the headless CLI and the HTTP service run from the same
source of truth.
"""
from __future__ import annotations

from dataclasses import dataclass

import yaml

from .errors import ValidationError
from .geo import GeoPoint
from .ingest import FilterCriteria, LabelSetDescriptor
from .store.base import Store
from .store.memory import FileStore, MemoryStore
from .store.sql import SqlStore
from .synth import RunwayLayout, SynthConfig

DEFAULT_LABELS = ("landing", "touch_and_go", "takeoff")

# Reference track format: OpenSky-style column names, SI units.
DEFAULT_FORMAT_YAML = """\
format_name: opensky_v1
delimiter: ","
columns:
  timestamp:  {source: "time",        type: epoch_seconds}
  latitude:   {source: "lat",         type: degrees}
  longitude:  {source: "lon",         type: degrees}
  altitude:   {source: "geoaltitude", type: meters}
  track_id:   {source: "icao24",      type: string}
extra_columns: ["velocity", "heading"]
"""


@dataclass
class AppConfig:
    raw: dict

    @classmethod
    def load(cls, path: str) -> "AppConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        if not isinstance(doc, dict):
            raise ValidationError(f"config {path!r} must be a YAML mapping")
        return cls(raw=doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "AppConfig":
        return cls(raw=dict(doc))

    def section(self, name: str) -> dict:
        value = self.raw.get(name, {})
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ValidationError(f"config section {name!r} must be a mapping")
        return value

    # -- storage -----------------------------------------------------------

    def make_store(self) -> Store:
        storage = self.section("storage")
        backend = storage.get("backend", "memory")
        if backend == "memory":
            return MemoryStore()
        if backend == "file":
            path = storage.get("path")
            if not path:
                raise ValidationError("storage.backend=file needs storage.path")
            return FileStore(path)
        if backend == "sqlite":
            url = storage.get("url")
            if not url:
                path = storage.get("path")
                url = f"sqlite:///{path}" if path else "sqlite://"
            return SqlStore(url)
        raise ValidationError(f"unknown storage backend: {backend!r}")

    # -- project -----------------------------------------------------------

    @property
    def project_name(self) -> str:
        name = self.section("project").get("name")
        if not name:
            raise ValidationError("config needs project.name")
        return name

    def label_set(self) -> LabelSetDescriptor:
        project = self.section("project")
        labels = tuple(project.get("labels", DEFAULT_LABELS))
        return LabelSetDescriptor(project_name=self.project_name, labels=labels)

    def project_config(self) -> dict:
        """The per-project configuration blob embedded in the store."""
        project = self.section("project")
        out = {}
        if "airport" in project:
            out["airport"] = dict(project["airport"])
        if "filter" in project:
            out["filter"] = dict(project["filter"])
        for key in ("pipeline", "ml", "split"):
            if key in self.raw and self.raw[key]:
                out[key] = dict(self.raw[key])
        out["formats"] = {"opensky_v1": DEFAULT_FORMAT_YAML}
        for name, text in (project.get("formats") or {}).items():
            out["formats"][name] = text
        return out

    def ensure_project(self, store: Store):
        try:
            return store.get_project(self.project_name)
        except LookupError:
            return store.create_project(
                self.project_name, self.label_set(), self.project_config()
            )

    def airport_ref(self) -> GeoPoint:
        airport = self.section("project").get("airport")
        if not airport:
            raise ValidationError("config needs project.airport")
        return GeoPoint(airport["latitude_deg"], airport["longitude_deg"],
                        airport.get("elevation_m", 0.0))

    def filter_criteria(self) -> FilterCriteria | None:
        flt = self.section("project").get("filter")
        if not flt:
            return None
        return FilterCriteria(
            airport_ref=self.airport_ref(),
            radius_nm=float(flt.get("radius_nm", 120.0)),
            agl_ceiling_ft=float(flt.get("agl_ceiling_ft", 1500.0)),
        )

    # -- synth ---------------------------------------------------------------

    def synth_config(self) -> SynthConfig:
        doc = self.section("synth")
        kwargs: dict = {}
        for key in ("seed", "n_per_behavior", "lateral_noise_m",
                    "vertical_noise_m", "timing_noise_s", "pattern_alt_m",
                    "dt_s", "speed_mps"):
            if key in doc:
                kwargs[key] = doc[key]
        if "runways" in doc:
            kwargs["runways"] = tuple(
                RunwayLayout(
                    heading_deg=r["heading_deg"],
                    offset_east_m=r.get("offset_east_m", 0.0),
                    offset_north_m=r.get("offset_north_m", 0.0),
                    length_m=r.get("length_m", 1000.0),
                )
                for r in doc["runways"]
            )
        airport = self.section("project").get("airport")
        if airport:
            kwargs["origin"] = GeoPoint(
                airport["latitude_deg"], airport["longitude_deg"],
                airport.get("elevation_m", 0.0),
            )
        return SynthConfig(**kwargs)

    # -- server / auth ----------------------------------------------------------

    @property
    def host(self) -> str:
        return self.section("server").get("host", "127.0.0.1")

    @property
    def port(self) -> int:
        return int(self.section("server").get("port", 8000))

    def auth_users(self) -> list[dict]:
        return list(self.section("auth").get("users", []))

    @property
    def token_ttl_s(self) -> float:
        return float(self.section("auth").get("token_ttl_s", 8 * 3600))
