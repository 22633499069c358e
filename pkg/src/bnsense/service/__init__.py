"""HTTP facade over the engine: sessions, queries, sensitivities, fitting.

Error contract: 404 unknown session or assessment index, 422 for domain
errors (impossible evidence, frozen parameter edits, invalid documents)
with a machine-readable reason, 400 for bodies that do not match the wire
schema at all. Response payloads reuse the CLI's JSON shapes, so a service
client and a `--format json` script see the same values.
"""

from __future__ import annotations

import json
import threading
import uuid
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import formats, inference, model
from ..errors import (
    DocumentError,
    EngineError,
    FrozenParameterError,
    InvalidScenarioError,
)
from ..fitting import (
    Assessment,
    FitConfig,
    ScoringRule,
    assessment_distance,
    fit,
    single_step,
)
from ..montecarlo import SamplerConfig, estimate_sensitivities
from ..sensitivity import Scenario, node_max_summary, sensitivities
from . import schemas
from .sessions import FitJob, Session, SessionStore


class _UnknownSession(Exception):
    pass


def create_app(history_cap: int = 100) -> FastAPI:
    app = FastAPI(title="bnsense", version="0.1.0")
    store = SessionStore(history_cap=history_cap)
    app.state.store = store

    @app.exception_handler(EngineError)
    async def _engine_error(request: Request, exc: EngineError):
        body: dict[str, Any] = {"reason": str(exc), "kind": type(exc).__name__}
        if isinstance(exc, DocumentError):
            body["issues"] = [str(i) for i in exc.issues]
        return JSONResponse(status_code=422, content=body)

    @app.exception_handler(_UnknownSession)
    async def _unknown_session(request: Request, exc: _UnknownSession):
        return JSONResponse(status_code=404, content={"reason": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"reason": "malformed request body", "errors": exc.errors()},
        )

    def session_of(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise _UnknownSession(f"unknown session {session_id!r}")
        return session

    def scenario_of(body: schemas.ScenarioIn) -> Scenario:
        return Scenario(evidence=dict(body.evidence), target=body.target)

    def assessment_of(body: schemas.AssessmentIn) -> Assessment:
        return Assessment(
            scenario=scenario_of(body.scenario),
            assessed=dict(body.assessed),
            weight=body.weight,
            kind=body.kind,
        )

    # -- session lifecycle --------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict[str, Any]):
        doc = formats.parse_document(json.dumps(payload))
        doc = formats.Document(
            version=doc.version,
            network=model.scale_to_unit(doc.network),
            scenarios=doc.scenarios,
            assessments=doc.assessments,
        )
        session = store.create(doc)
        return {"session_id": session.id, "revision": session.revision}

    @app.get("/sessions/{session_id}/network")
    def get_network(session_id: str):
        session = session_of(session_id)
        doc, revision = session.snapshot()
        return {"revision": revision, "document": formats.document_to_jsonable(doc)}

    @app.patch("/sessions/{session_id}/params")
    def patch_params(session_id: str, body: schemas.PatchParamsRequest):
        session = session_of(session_id)
        with session.lock:
            doc = session.doc
            net = doc.network
            updates = {}
            for u in body.updates:
                p = formats.param_index_from_jsonable(net, u.param)
                if model.is_frozen(net, p):
                    raise FrozenParameterError(
                        f"frozen parameter {p.describe(net)} cannot be edited")
                updates[p] = u.value
            new_net = net.with_params(updates)
            model.require_valid(new_net)
            session.history.append(formats.serialize_document(doc))
            session.doc = formats.Document(
                version=doc.version,
                network=new_net,
                scenarios=doc.scenarios,
                assessments=doc.assessments,
            )
            session.revision += 1
            return {"revision": session.revision}

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = session_of(session_id)
        revision = session.undo()
        if revision is None:
            raise InvalidScenarioError("nothing to undo")
        return {"revision": revision}

    # -- pure queries ---------------------------------------------------------

    @app.post("/sessions/{session_id}/query")
    def query(session_id: str, body: schemas.ScenarioIn):
        session = session_of(session_id)
        doc, _ = session.snapshot()
        sc = scenario_of(body)
        from ..sensitivity import check_scenario

        check_scenario(doc.network, sc)
        cal = session.ctx.propagate(sc.evidence, net=doc.network)
        marg = cal.marginal(sc.target)
        return formats.query_to_jsonable(doc.network, sc.target, marg / marg.sum())

    @app.post("/sessions/{session_id}/sensitivities")
    def get_sensitivities(session_id: str, body: schemas.SensitivitiesRequest):
        session = session_of(session_id)
        doc, _ = session.snapshot()
        report = sensitivities(
            doc.network, scenario_of(body), nodes=body.nodes, ctx=session.ctx)
        if body.summary:
            return formats.node_summary_to_jsonable(doc.network, node_max_summary(report))
        return formats.sensitivity_report_to_jsonable(doc.network, report)

    @app.post("/sessions/{session_id}/mc-sensitivities")
    def get_mc_sensitivities(session_id: str, body: schemas.McSensitivitiesRequest):
        session = session_of(session_id)
        doc, _ = session.snapshot()
        cfg = SamplerConfig(
            method=body.method, sample_count=body.sample_count, seed=body.seed)
        report = estimate_sensitivities(doc.network, scenario_of(body), cfg)
        return formats.estimated_report_to_jsonable(doc.network, report)

    # -- assessments ------------------------------------------------------------

    @app.get("/sessions/{session_id}/assessments")
    def list_assessments(session_id: str):
        session = session_of(session_id)
        doc, revision = session.snapshot()
        return {
            "revision": revision,
            "assessments": [formats.assessment_to_jsonable(a) for a in doc.assessments],
        }

    def _assessments_mutation(session: Session, mutate) -> dict:
        with session.lock:
            doc = session.doc
            new_assessments = mutate(list(doc.assessments), doc)
            session.history.append(formats.serialize_document(doc))
            session.doc = formats.Document(
                version=doc.version,
                network=doc.network,
                scenarios=doc.scenarios,
                assessments=tuple(new_assessments),
            )
            session.revision += 1
            return {"revision": session.revision, "count": len(new_assessments)}

    @app.post("/sessions/{session_id}/assessments", status_code=201)
    def add_assessment(session_id: str, body: schemas.AssessmentIn):
        session = session_of(session_id)
        a = assessment_of(body)

        def mutate(items, doc):
            from ..fitting import check_assessment

            check_assessment(doc.network, a)
            items.append(a)
            return items

        out = _assessments_mutation(session, mutate)
        out["index"] = out["count"] - 1
        return out

    @app.put("/sessions/{session_id}/assessments/{index}")
    def replace_assessment(session_id: str, index: int, body: schemas.AssessmentIn):
        session = session_of(session_id)
        a = assessment_of(body)

        def mutate(items, doc):
            from ..fitting import check_assessment

            if not 0 <= index < len(items):
                raise _UnknownSession(f"no assessment at index {index}")
            check_assessment(doc.network, a)
            items[index] = a
            return items

        return _assessments_mutation(session, mutate)

    @app.delete("/sessions/{session_id}/assessments/{index}")
    def delete_assessment(session_id: str, index: int):
        session = session_of(session_id)

        def mutate(items, doc):
            if not 0 <= index < len(items):
                raise _UnknownSession(f"no assessment at index {index}")
            del items[index]
            return items

        return _assessments_mutation(session, mutate)

    # -- fitting -----------------------------------------------------------------

    def _run_fit(session: Session, job: FitJob, doc, cfg: FitConfig, rule: ScoringRule):
        try:
            result = fit(doc.network, doc.assessments, rule, cfg)
            new_doc = formats.Document(
                version=doc.version,
                network=result.network,
                scenarios=doc.scenarios,
                assessments=doc.assessments,
            )
            applied_revision = session.mutate(new_doc, expected_revision=job.base_revision)
            with session.lock:
                job.result = formats.fit_result_to_jsonable(result)
                job.applied = applied_revision is not None
                job.status = "done"
        except Exception as e:  # job errors surface through polling, not logs
            with session.lock:
                job.error = str(e)
                job.status = "failed"

    @app.post("/sessions/{session_id}/fit", status_code=202)
    def start_fit(session_id: str, body: schemas.FitRequest):
        session = session_of(session_id)
        doc, revision = session.snapshot()
        if not doc.assessments:
            raise InvalidScenarioError("session has no assessments to fit")
        cfg = FitConfig(
            step_size=body.step_size,
            max_epochs=body.max_epochs,
            convergence_tol=body.convergence_tol,
            restarts=body.restarts,
            scenario_order=body.scenario_order,
            parameter_floor=body.parameter_floor,
            seed=body.seed,
        )
        rule = ScoringRule(body.rule)
        job = FitJob(id=uuid.uuid4().hex, base_revision=revision)
        with session.lock:
            session.fit_jobs[job.id] = job
        if body.wait:
            _run_fit(session, job, doc, cfg, rule)
        else:
            thread = threading.Thread(
                target=_run_fit, args=(session, job, doc, cfg, rule), daemon=True)
            thread.start()
        return {"job_id": job.id, "status": job.status}

    @app.get("/sessions/{session_id}/fit/{job_id}")
    def fit_status(session_id: str, job_id: str):
        session = session_of(session_id)
        with session.lock:
            job = session.fit_jobs.get(job_id)
            if job is None:
                raise _UnknownSession(f"unknown fit job {job_id!r}")
            out: dict[str, Any] = {"job_id": job.id, "status": job.status}
            if job.status == "done":
                out["result"] = job.result
                out["applied"] = job.applied
                out["revision"] = session.revision
            elif job.status == "failed":
                out["error"] = job.error
            return out

    @app.post("/sessions/{session_id}/gradient-step")
    def gradient_step(session_id: str, body: schemas.GradientStepRequest):
        session = session_of(session_id)
        with session.lock:
            doc = session.doc
            a = assessment_of(body.assessment)
            new_net, dist, distance = single_step(
                doc.network, a, ScoringRule(body.rule), body.step_size, ctx=session.ctx)
            session.history.append(formats.serialize_document(doc))
            session.doc = formats.Document(
                version=doc.version,
                network=new_net,
                scenarios=doc.scenarios,
                assessments=doc.assessments,
            )
            session.revision += 1
            return {
                "revision": session.revision,
                "distribution": formats.query_to_jsonable(
                    new_net, a.scenario.target, dist),
                "distance": distance,
            }

    return app
