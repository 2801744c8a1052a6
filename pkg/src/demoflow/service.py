"""HTTP API around the automation store.

One JSON document per automation, one lock per automation id; mutations
are serialized per automation while requests across automations run
concurrently. All domain behaviour lives in the other modules; routes
translate between HTTP and those calls, so the API path and the direct
library path always agree.
"""

from __future__ import annotations

import json
import logging
from typing import Optional

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from . import dom, model, runtime, semantic, store, synthesis
from .errors import (
    DemoflowError,
    DuplicateName,
    GuardFailed,
    InvalidScenario,
    MalformedCsv,
    NoSemanticMatch,
    TransitionMissing,
    UnknownAutomation,
)

log = logging.getLogger(__name__)

TEMPLATE_KIND = "table→automation→table"

_STATUS_BY_ERROR = {
    UnknownAutomation: 404,
    DuplicateName: 409,
    GuardFailed: 409,
    TransitionMissing: 409,
}


def _status_for(exc: DemoflowError) -> int:
    for klass, status in _STATUS_BY_ERROR.items():
        if isinstance(exc, klass):
            return status
    return 422


def _summary_doc(summary: model.AutomationSummary) -> dict:
    validation = None
    if summary.validation is not None:
        validation = {
            "totalRows": summary.validation.total_rows,
            "validatedRows": summary.validation.validated_rows,
            "failedRows": summary.validation.failed_rows,
        }
    return {
        "sampleLoaded": summary.sample_loaded,
        "outputConfigured": summary.output_configured,
        "mergedScenarios": summary.merged_scenarios,
        "outstandingConflicts": summary.outstanding_conflicts,
        "validation": validation,
    }


def create_app(
    data_dir: Optional[str] = None,
    catalog: Optional[semantic.SemanticCatalog] = None,
    oracle: Optional[semantic.OracleConfig] = None,
    oracle_transport: Optional[semantic.Transport] = None,
) -> FastAPI:
    """Build the service. Oracle settings default to the environment; pass
    them explicitly (with a stub transport) in tests."""
    app = FastAPI(title="demoflow", version="0.1.0")
    records = store.Store(data_dir)
    the_catalog = catalog or semantic.default_catalog()
    oracle_config = oracle if oracle is not None else semantic.OracleConfig.from_env()
    sim_sessions: dict[str, runtime.SimSession] = {}

    @app.exception_handler(DemoflowError)
    async def _domain_error(_request: Request, exc: DemoflowError) -> JSONResponse:
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def normalize_draft(
        record: store.AutomationRecord, events: list[model.ActionEvent], row_index: int
    ) -> list[model.Step]:
        if record.schema is None:
            raise GuardFailed("upload a sample table before teaching")
        table = record.table()
        assert table is not None
        return model.normalize_events(
            events,
            record.snapshot_store(),
            record.schema,
            table.row(row_index),
            catalog=the_catalog,
            oracle=oracle_config,
            oracle_transport=oracle_transport,
        )

    # --- automations ---

    @app.post("/automations", status_code=201)
    def create_automation(payload: dict = Body(...)) -> JSONResponse:
        name = payload.get("name")
        if not isinstance(name, str) or not name.strip():
            return JSONResponse(status_code=400, content={"detail": "a non-empty name is required"})
        template = payload.get("templateKind", TEMPLATE_KIND)
        if template != TEMPLATE_KIND:
            raise GuardFailed(f"only the {TEMPLATE_KIND!r} template is supported")
        record = records.create(name.strip(), payload.get("description", ""))
        return JSONResponse(status_code=201, content={
            "automationId": record.automation_id,
            "name": record.name,
            "lifecycle": record.lifecycle.value,
        })

    @app.get("/automations")
    def list_automations() -> dict:
        return {"automations": records.list_summaries()}

    @app.get("/automations/{automation_id}")
    def get_automation(automation_id: str) -> dict:
        record = records.load(automation_id)
        table = record.table()
        return {
            "automationId": record.automation_id,
            "name": record.name,
            "description": record.description,
            "lifecycle": record.lifecycle.value,
            "schema": record.schema.to_doc() if record.schema else None,
            "rowCount": len(table.rows) if table else 0,
            "scenarios": [
                {"scenarioId": s.scenario_id, "name": s.name,
                 "sampleRowIndex": s.sample_row_index}
                for s in record.scenarios
            ],
            "drafts": sorted(record.drafts),
            "conflicts": {sid: c.to_doc() for sid, c in record.conflicts.items()},
            "summary": _summary_doc(record.summary()),
        }

    @app.post("/automations/{automation_id}/sample")
    def upload_sample(automation_id: str, payload: dict = Body(...)) -> dict:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            if record.lifecycle != model.LifecycleState.DEFINE:
                raise GuardFailed(
                    f"sample can only change in the Define stage, not {record.lifecycle.value}"
                )
            csv_text = payload.get("csv")
            if not isinstance(csv_text, str):
                raise MalformedCsv("body must include the sample CSV text under 'csv'")
            table = model.load_sample_table(
                csv_text,
                decision_values=payload.get("decisionValues", []),
                decision_column=payload.get("decisionColumn"),
                extraction_column=payload.get("extractionColumn"),
            )
            record.schema = table.schema
            record.sample_csv = csv_text
            records.save(record)
            return {"schema": table.schema.to_doc(), "rowCount": len(table.rows)}

    # --- teaching ---

    @app.post("/automations/{automation_id}/scenarios/{scenario_id}/events")
    def post_events(automation_id: str, scenario_id: str, payload: dict = Body(...)) -> dict:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            if record.lifecycle != model.LifecycleState.TEACH:
                record.lifecycle = model.advance_lifecycle(
                    record.lifecycle, model.LifecycleState.TEACH, record.summary()
                )
            for ref, html in (payload.get("snapshots") or {}).items():
                existing = record.snapshots.get(ref)
                if existing is not None and existing != html:
                    raise InvalidScenario(
                        f"snapshot {ref!r} already recorded with different content"
                    )
                record.snapshots[ref] = html

            draft = record.drafts.get(scenario_id)
            if draft is None:
                draft = store.DraftScenario(
                    scenario_id=scenario_id,
                    name=payload.get("name", scenario_id),
                    sample_row_index=int(payload.get("sampleRowIndex", 0)),
                )
                record.drafts[scenario_id] = draft

            new_events = [model.ActionEvent.from_doc(e) for e in payload.get("events", [])]
            table = record.table()
            if record.schema is None or table is None:
                raise GuardFailed("upload a sample table before teaching")
            row = table.row(draft.sample_row_index)

            def run(events: list[model.ActionEvent]) -> list[model.Step]:
                return model.normalize_events(
                    events, record.snapshot_store(), record.schema, row,  # type: ignore[arg-type]
                    catalog=the_catalog, oracle=oracle_config,
                    oracle_transport=oracle_transport,
                )

            previous = run(draft.events)
            try:
                steps = run(draft.events + new_events)
            except NoSemanticMatch as exc:
                only_select = (
                    len(new_events) == 1
                    and new_events[0].kind == model.EventKind.SELECT_OBJECT
                )
                if not only_select:
                    raise
                records.save(record)
                return {
                    "scenarioId": scenario_id,
                    "steps": [s.to_doc() for s in previous],
                    "appended": [],
                    "notice": f"no semantic object here: {exc}",
                }

            draft.events = draft.events + new_events
            records.save(record)
            response: dict = {
                "scenarioId": scenario_id,
                "steps": [s.to_doc() for s in steps],
                "appended": [s.to_doc() for s in steps[len(previous):]],
            }
            if new_events and new_events[-1].kind == model.EventKind.SELECT_OBJECT:
                selected = next(
                    (s for s in reversed(steps) if s.kind == model.EventKind.SELECT_OBJECT),
                    None,
                )
                if selected is not None and selected.object_def is not None:
                    snap = record.snapshot_store().get(new_events[-1].snapshot_ref)
                    response["object"] = selected.object_def.to_doc()
                    response["suggestedConditions"] = semantic.suggest_conditions(
                        selected.object_def, snap
                    )
            return response

    @app.post("/automations/{automation_id}/scenarios/{scenario_id}/finish")
    def finish_scenario(
        automation_id: str, scenario_id: str, payload: dict = Body(default={})
    ) -> JSONResponse:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            draft = record.drafts.get(scenario_id)
            if draft is None:
                return JSONResponse(status_code=404, content={
                    "detail": f"no open scenario {scenario_id!r}"
                })
            if record.schema is None:
                raise GuardFailed("upload a sample table before teaching")

            events = list(draft.events)
            decision = payload.get("decision")
            if decision is not None:
                last = events[-1] if events else None
                if last is None or last.kind != model.EventKind.DECIDE:
                    seq = (last.seq + 1) if last else 1
                    ref = last.snapshot_ref if last else ""
                    events.append(model.ActionEvent(
                        seq, model.EventKind.DECIDE, ref, decision=decision,
                    ))

            steps = normalize_draft(record, events, draft.sample_row_index)
            scenario = model.Scenario(
                scenario_id=scenario_id,
                name=draft.name,
                steps=tuple(steps),
                sample_row_index=draft.sample_row_index,
            )
            before = record.program()
            merged, conflict = synthesis.merge_scenario(before, scenario, record.schema)
            if conflict is not None:
                record.conflicts[scenario_id] = conflict
                records.save(record)
                return JSONResponse(status_code=409, content={
                    "merged": False,
                    "conflict": conflict.to_doc(),
                    "coverage": synthesis.coverage(before, record.schema).to_doc(),
                })
            record.scenarios.append(scenario)
            record.drafts.pop(scenario_id, None)
            record.conflicts.pop(scenario_id, None)
            records.save(record)
            return JSONResponse(content={
                "merged": True,
                "scenarioId": scenario_id,
                "coverage": synthesis.coverage(merged, record.schema).to_doc(),
                "program": synthesis.export_json(merged),
            })

    @app.delete("/automations/{automation_id}/scenarios/{scenario_id}")
    def delete_scenario(automation_id: str, scenario_id: str) -> JSONResponse:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            known = (scenario_id in record.drafts
                     or any(s.scenario_id == scenario_id for s in record.scenarios))
            if not known:
                return JSONResponse(status_code=404, content={
                    "detail": f"no scenario {scenario_id!r}"
                })
            remaining = [s for s in record.scenarios if s.scenario_id != scenario_id]
            if record.schema is not None and remaining != record.scenarios:
                _, conflicts = synthesis.synthesize_all(remaining, record.schema)
                if conflicts:
                    return JSONResponse(status_code=409, content={
                        "detail": "removing this scenario leaves the others in conflict",
                        "conflicts": [c.to_doc() for c in conflicts],
                    })
            record.scenarios = remaining
            record.drafts.pop(scenario_id, None)
            record.conflicts.pop(scenario_id, None)
            records.save(record)
            return JSONResponse(content={"deleted": scenario_id})

    # --- program / coverage ---

    @app.get("/automations/{automation_id}/program")
    def get_program(automation_id: str, format: str = "json"):
        record = records.load(automation_id)
        program = record.program()
        if format == "json":
            return synthesis.export_json(program)
        if format == "dot":
            return PlainTextResponse(synthesis.export_dot(program))
        return JSONResponse(status_code=422, content={
            "detail": f"unknown format {format!r}; use json or dot"
        })

    @app.get("/automations/{automation_id}/coverage")
    def get_coverage(automation_id: str) -> dict:
        record = records.load(automation_id)
        if record.schema is None:
            raise GuardFailed("upload a sample table first")
        return synthesis.coverage(record.program(), record.schema).to_doc()

    # --- simulated app and validation ---

    @app.post("/automations/{automation_id}/simapp")
    def upload_simapp(automation_id: str, payload: dict = Body(...)) -> dict:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            app_spec = runtime.SimApp.from_doc(payload)
            record.simapp_doc = payload
            records.save(record)
            sim_sessions.pop(automation_id, None)
            return {"pages": sorted(app_spec.pages), "records": len(app_spec.dataset)}

    def _session_view(record: store.AutomationRecord, session: runtime.SimSession) -> dict:
        ref = session.snapshot_ref
        html = session.render_html()
        snap = session.snapshot()
        record.snapshots[ref] = html
        records.save(record)
        return {
            "snapshotRef": ref,
            "page": session.page,
            "sourceHtml": html,
            "renderedHtml": dom.node_to_html(snap.root, annotate=True),
            "nodes": [
                {"nodeId": n.node_id, "tag": n.tag,
                 "label": dom.associate_label(snap, n.node_id)}
                for n in snap.iter_nodes()
            ],
        }

    @app.post("/automations/{automation_id}/sim/reset")
    def sim_reset(automation_id: str, payload: dict = Body(default={})) -> dict:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            if record.simapp_doc is None:
                raise GuardFailed("upload a simulated app spec first")
            prefix = payload.get("refPrefix", "sim-")
            session = runtime.SimApp.from_doc(record.simapp_doc).session(ref_prefix=prefix)
            sim_sessions[automation_id] = session
            return _session_view(record, session)

    @app.post("/automations/{automation_id}/sim/act")
    def sim_act(automation_id: str, payload: dict = Body(...)) -> dict:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            session = sim_sessions.get(automation_id)
            if session is None:
                raise GuardFailed("reset the simulator before acting")
            action = payload.get("action")
            node_id = payload.get("nodeId", "")
            if action == "click":
                session.click(node_id)
            elif action == "type":
                session.type_into(node_id, str(payload.get("value", "")))
            else:
                raise GuardFailed(f"unknown action {action!r}; use click or type")
            return _session_view(record, session)

    @app.post("/automations/{automation_id}/validate")
    def run_validation(automation_id: str):
        lock = store.record_lock(automation_id)
        with lock:
            record = records.load(automation_id)
            if record.conflicts:
                return JSONResponse(status_code=409, content={
                    "detail": "resolve outstanding conflicts before validating",
                    "conflicts": [c.to_doc() for c in record.conflicts.values()],
                })
            if record.simapp_doc is None:
                raise GuardFailed("upload a simulated app spec before validating")
            table = record.table()
            if record.schema is None or table is None:
                raise GuardFailed("upload a sample table before validating")
            if not record.scenarios:
                raise GuardFailed("teach at least one scenario before validating")
            if record.lifecycle in (model.LifecycleState.DEFINE, model.LifecycleState.TEACH):
                record.lifecycle = model.advance_lifecycle(
                    record.lifecycle, model.LifecycleState.VALIDATE, record.summary()
                )
                records.save(record)
            program = record.program()
            sim = runtime.SimApp.from_doc(record.simapp_doc)
            schema = record.schema

        def stream():
            with lock:
                final: Optional[runtime.ValidationReport] = None
                for kind, payload in runtime.validate_stream(program, schema, table, sim):
                    if kind == "progress":
                        yield json.dumps({"kind": "progress", **payload}) + "\n"
                    elif kind == "row":
                        yield json.dumps({"kind": "row", **payload.to_doc()}) + "\n"
                    else:
                        final = payload
                assert final is not None
                fresh = records.load(automation_id)
                fresh.last_report = final.to_doc()
                records.save(fresh)
                yield json.dumps({
                    "kind": "report",
                    "report": final.to_doc(),
                    "outputCsv": runtime.output_csv(final, table),
                }) + "\n"

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    # --- lifecycle ---

    @app.post("/automations/{automation_id}/lifecycle")
    def advance(automation_id: str, payload: dict = Body(...)) -> dict:
        with store.record_lock(automation_id):
            record = records.load(automation_id)
            raw = payload.get("target", "")
            try:
                target = model.LifecycleState(raw)
            except ValueError:
                raise GuardFailed(f"unknown lifecycle stage {raw!r}") from None
            record.lifecycle = model.advance_lifecycle(
                record.lifecycle, target, record.summary()
            )
            records.save(record)
            return {"lifecycle": record.lifecycle.value}

    return app
