"""HTTP gateway: every endpoint delegates to a store or workflow operation.

Single service, token auth, JSON bodies (file uploads are raw text). Domain
errors map totally onto status codes: 401 unauthenticated, 404 not found,
409 workflow lock held, 422 validation, 500 internal with a machine code.
"""
from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Query as QueryParam, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..errors import (
    AnnotrackError,
    NotFoundError,
    StorageError,
    ValidationError,
    WorkflowLockError,
)
from ..ingest import (
    AnnotationIngestDescriptor,
    LabelSetDescriptor,
    apply_filter_criteria,
    ingest_external_annotations,
    parse_format_descriptor,
    parse_track_file,
)
from ..geo import GeoPoint, Track
from ..ingest import FilterCriteria
from ..store.base import Store
from ..store.types import Query
from ..workflow import WorkflowRunner
from .auth import AuthError, AuthManager, User


class LoginBody(BaseModel):
    username: str
    password: str


class ProjectBody(BaseModel):
    name: str
    labels: list[str] | None = None
    airport: dict | None = None
    filter: dict | None = None
    pipeline: dict | None = None
    ml: dict | None = None
    split: dict | None = None


class AnnotationBody(BaseModel):
    subject: str
    label: str


class BatchBody(BaseModel):
    query: dict
    label: str


class IngestBody(BaseModel):
    algorithm: str
    version: str
    labels: list[str]
    rows: list[tuple[str, str]]


class TrainBody(BaseModel):
    kind: str = "svm"
    version: str
    sets: list[int]


class InferBody(BaseModel):
    set: int


def _query_from_dict(doc: dict) -> Query:
    known = {"label", "annotator", "verified", "runway_id", "runway",
             "set_index", "set", "bbox", "time_range", "limit", "offset"}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown query fields: {sorted(unknown)}")
    return Query(
        label=doc.get("label"),
        annotator=doc.get("annotator"),
        verified=doc.get("verified"),
        runway_id=doc.get("runway_id", doc.get("runway")),
        set_index=doc.get("set_index", doc.get("set")),
        bbox=tuple(doc["bbox"]) if doc.get("bbox") else None,
        time_range=tuple(doc["time_range"]) if doc.get("time_range") else None,
        limit=doc.get("limit"),
        offset=doc.get("offset", 0),
    )


def _track_json(track: Track) -> dict:
    return {
        "track_id": track.track_id,
        "points": [
            [p.timestamp_s, p.geo.latitude_deg, p.geo.longitude_deg,
             p.geo.altitude_m]
            for p in track.points
        ],
        "extras": track.extras,
    }


def create_app(store: Store, auth: AuthManager) -> FastAPI:
    app = FastAPI(title="annotrack", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.auth = auth

    # -- error mapping -------------------------------------------------------

    def _error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"code": code, "message": message})

    @app.exception_handler(AuthError)
    async def _auth_error(_req: Request, exc: AuthError):
        return _error(401, "unauthenticated", str(exc))

    @app.exception_handler(NotFoundError)
    async def _not_found(_req: Request, exc: NotFoundError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ValidationError)
    async def _validation(_req: Request, exc: ValidationError):
        return _error(422, "validation", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _req_validation(_req: Request, exc: RequestValidationError):
        return _error(422, "validation", str(exc))

    @app.exception_handler(WorkflowLockError)
    async def _locked(_req: Request, exc: WorkflowLockError):
        return _error(409, "locked", str(exc))

    @app.exception_handler(StorageError)
    async def _storage(_req: Request, exc: StorageError):
        return _error(500, "storage", str(exc))

    @app.exception_handler(AnnotrackError)
    async def _domain(_req: Request, exc: AnnotrackError):
        return _error(500, "internal", str(exc))

    @app.exception_handler(Exception)
    async def _internal(_req: Request, exc: Exception):
        return _error(500, "internal", f"{type(exc).__name__}: {exc}")

    # -- auth ------------------------------------------------------------------

    def current_user(request: Request) -> User:
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip() if header else None
        return auth.authenticate(token)

    def human_annotator(user: User):
        return store.register_annotator("human", user.username, role=user.role)

    @app.post("/api/auth/login")
    def login(body: LoginBody):
        token = auth.login(body.username, body.password)
        return {"token": token, "username": body.username}

    # -- projects ---------------------------------------------------------------

    @app.post("/api/projects", status_code=201)
    def create_project(body: ProjectBody, user: User = Depends(current_user)):
        labels = tuple(body.labels or ("landing", "touch_and_go", "takeoff"))
        config: dict = {"formats": {}}
        for key in ("airport", "filter", "pipeline", "ml", "split"):
            value = getattr(body, key)
            if value:
                config[key] = value
        from ..config import DEFAULT_FORMAT_YAML
        config["formats"]["opensky_v1"] = DEFAULT_FORMAT_YAML
        project = store.create_project(
            body.name,
            LabelSetDescriptor(project_name=body.name, labels=labels),
            config,
        )
        return {"id": project.id, "name": project.name, "labels": list(labels)}

    @app.get("/api/projects")
    def list_projects(user: User = Depends(current_user)):
        return {
            "projects": [
                {"id": p.id, "name": p.name, "labels": list(p.labels)}
                for p in store.list_projects()
            ]
        }

    @app.get("/api/projects/{project}")
    def get_project(project: str, user: User = Depends(current_user)):
        p = store.get_project(project)
        return {
            "id": p.id,
            "name": p.name,
            "labels": list(p.labels),
            "runways": [r.__dict__ for r in store.runways(p.id)],
            "num_tracks": len(store.track_ids(p.id)),
            "num_segments": len(store.segments(p.id)),
        }

    # -- formats and track upload ---------------------------------------------------

    @app.post("/api/projects/{project}/formats", status_code=201)
    async def add_format(project: str, request: Request,
                         user: User = Depends(current_user)):
        text = (await request.body()).decode("utf-8")
        descriptor = parse_format_descriptor(text)
        p = store.get_project(project)
        formats = dict(p.config.get("formats", {}))
        formats[descriptor.format_name] = text
        store.update_project_config(p.id, {"formats": formats})
        return {
            "format_name": descriptor.format_name,
            "roles": sorted(descriptor.columns),
            "extra_columns": list(descriptor.extra_columns),
        }

    @app.post("/api/projects/{project}/tracks", status_code=201)
    async def upload_tracks(project: str, request: Request,
                            format: str = QueryParam(...),
                            filter: bool = QueryParam(True),
                            user: User = Depends(current_user)):
        p = store.get_project(project)
        formats = p.config.get("formats", {})
        if format not in formats:
            raise NotFoundError(f"unknown format: {format!r}")
        descriptor = parse_format_descriptor(formats[format])
        result = parse_track_file(await request.body(), descriptor)
        tracks = result.tracks
        if filter and p.config.get("filter") and p.config.get("airport"):
            airport = p.config["airport"]
            criteria = FilterCriteria(
                airport_ref=GeoPoint(
                    airport["latitude_deg"], airport["longitude_deg"],
                    airport.get("elevation_m", 0.0),
                ),
                radius_nm=float(p.config["filter"].get("radius_nm", 120.0)),
                agl_ceiling_ft=float(p.config["filter"].get("agl_ceiling_ft", 1500.0)),
            )
            tracks = apply_filter_criteria(tracks, criteria)
        tracks = [t for t in tracks if len(t.points) >= 2]
        count = store.upsert_tracks(p.id, tracks)
        return {
            "ingested_tracks": count,
            "rejected_rows": result.num_rejected,
            "rejected_detail": result.rejected_rows[:20],
        }

    # -- track queries -----------------------------------------------------------

    @app.get("/api/projects/{project}/tracks")
    def query_tracks(
        project: str,
        label: Optional[str] = None,
        annotator: Optional[str] = None,
        runway: Optional[str] = None,
        verified: Optional[bool] = None,
        set: Optional[int] = None,
        bbox: Optional[str] = None,
        t0: Optional[float] = None,
        t1: Optional[float] = None,
        limit: Optional[int] = None,
        offset: int = 0,
        include: Optional[str] = None,
        user: User = Depends(current_user),
    ):
        p = store.get_project(project)
        parsed_bbox = None
        if bbox:
            parts = [float(v) for v in bbox.split(",")]
            if len(parts) != 4:
                raise ValidationError("bbox must be min_lat,min_lon,max_lat,max_lon")
            parsed_bbox = tuple(parts)
        time_range = None
        if t0 is not None or t1 is not None:
            time_range = (t0 if t0 is not None else float("-inf"),
                          t1 if t1 is not None else float("inf"))
        query = Query(
            label=label, annotator=annotator, verified=verified,
            runway_id=runway, set_index=set, bbox=parsed_bbox,
            time_range=time_range, limit=limit, offset=offset,
        )
        ids = store.query_tracks(p.id, query)
        out = {"ids": ids, "total": len(ids)}
        if include == "geometry":
            tracks = []
            for subject in ids:
                detail = store.get_track(p.id, subject)
                doc = _track_json(detail.track)
                doc["annotations"] = [
                    {
                        "label": a.label,
                        "annotator": store.get_annotator(a.annotator_id).display_name,
                        "verified": a.verified,
                    }
                    for a in detail.annotations
                ]
                if detail.segment is not None:
                    doc["runway_id"] = detail.segment.runway_id
                    doc["set_index"] = detail.segment.set_index
                    doc["parent_track_id"] = detail.segment.track_id
                tracks.append(doc)
            out["tracks"] = tracks
        return out

    @app.get("/api/projects/{project}/tracks/{subject_id}")
    def get_track(project: str, subject_id: str,
                  user: User = Depends(current_user)):
        p = store.get_project(project)
        detail = store.get_track(p.id, subject_id)
        doc = {
            "track": _track_json(detail.track),
            "meta": detail.meta.__dict__,
            "annotations": [
                {
                    "id": a.id,
                    "label": a.label,
                    "annotator": store.get_annotator(a.annotator_id).display_name,
                    "verified": a.verified,
                    "created_at": a.created_at,
                }
                for a in detail.annotations
            ],
        }
        if detail.segment is not None:
            seg = detail.segment
            doc["segment"] = {
                "segment_id": seg.segment_id,
                "track_id": seg.track_id,
                "point_range": [seg.start_idx, seg.end_idx],
                "avg_direction_deg": seg.avg_direction_deg,
                "runway_id": seg.runway_id,
                "feature": list(seg.feature) if seg.feature else None,
                "contains_contact": seg.contains_contact,
                "climbs_out": seg.climbs_out,
                "set_index": seg.set_index,
            }
        return doc

    # -- annotation ---------------------------------------------------------------

    @app.post("/api/projects/{project}/annotations", status_code=201)
    def annotate(project: str, body: AnnotationBody,
                 user: User = Depends(current_user)):
        p = store.get_project(project)
        record = store.annotate(p.id, body.subject, body.label,
                                human_annotator(user))
        return {
            "id": record.id, "subject": record.subject, "label": record.label,
            "verified": record.verified, "annotator": user.username,
        }

    @app.post("/api/projects/{project}/annotations/batch")
    def batch_annotate(project: str, body: BatchBody,
                       user: User = Depends(current_user)):
        p = store.get_project(project)
        count = store.batch_annotate(p.id, _query_from_dict(body.query),
                                     body.label, human_annotator(user))
        return {"count": count}

    @app.post("/api/projects/{project}/annotations/ingest")
    def ingest_annotations(project: str, body: IngestBody,
                           user: User = Depends(current_user)):
        p = store.get_project(project)
        descriptor = AnnotationIngestDescriptor(
            algorithm=body.algorithm, version=body.version,
            labels=tuple(body.labels),
        )
        unknown = [l for l in descriptor.labels if l not in p.labels]
        if unknown:
            raise ValidationError(f"labels not in project label set: {unknown}")
        result = ingest_external_annotations(body.rows, descriptor)
        count, errors = store.ingest_annotations(p.id, result.records)
        all_errors = result.errors + errors
        return {"ingested": count, "errors": [list(e) for e in all_errors]}

    @app.get("/api/projects/{project}/annotations/export")
    def export_annotations(project: str, format: str = "csv",
                           user: User = Depends(current_user)):
        p = store.get_project(project)
        payload = store.export_annotations(p.id, format)
        media = "text/csv" if format == "csv" else "application/json"
        return Response(content=payload, media_type=media)

    # -- pipeline / models / reports -------------------------------------------------

    @app.post("/api/projects/{project}/pipeline/run")
    def run_pipeline(project: str, user: User = Depends(current_user)):
        runner = WorkflowRunner(store, project, owner=f"http-{user.username}")
        return runner.run_pipeline()

    @app.post("/api/projects/{project}/models/train", status_code=201)
    def train_model(project: str, body: TrainBody,
                    user: User = Depends(current_user)):
        runner = WorkflowRunner(store, project, owner=f"http-{user.username}")
        if body.kind == "kmeans":
            if len(body.sets) != 1:
                raise ValidationError("kmeans bootstrap takes exactly one set")
            cycle = runner.bootstrap_cycle(body.sets[0], version=body.version)
            return {"model": cycle.model_ref, "ingested": True}
        if body.kind == "svm":
            model_ref = runner.train_cycle(body.sets, body.version)
            return {"model": model_ref, "ingested": False}
        raise ValidationError(f"unknown model kind: {body.kind!r}")

    @app.get("/api/projects/{project}/models")
    def list_models(project: str, user: User = Depends(current_user)):
        p = store.get_project(project)
        return {"models": store.list_models(p.id)}

    @app.post("/api/projects/{project}/models/{model_ref}/infer")
    def infer(project: str, model_ref: str, body: InferBody,
              user: User = Depends(current_user)):
        runner = WorkflowRunner(store, project, owner=f"http-{user.username}")
        count = runner.infer_cycle(model_ref, body.set)
        return {"ingested": count}

    @app.get("/api/projects/{project}/models/{model_ref}/metrics")
    def metrics(project: str, model_ref: str, set: Optional[int] = None,
                user: User = Depends(current_user)):
        p = store.get_project(project)
        runner = WorkflowRunner(store, project, owner=f"http-{user.username}")
        validation_set = set if set is not None else runner.split_config["validation_set"]
        try:
            return store.get_eval_report(p.id, model_ref, validation_set)
        except NotFoundError:
            report = runner.evaluate_on(model_ref, validation_set)
            return report.to_dict()

    @app.get("/api/projects/{project}/reports/effort")
    def effort_report(project: str, user: User = Depends(current_user)):
        runner = WorkflowRunner(store, project, owner=f"http-{user.username}")
        return Response(content=runner.effort_report_csv(), media_type="text/csv")

    return app
