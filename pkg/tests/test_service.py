import json

import pytest
from fastapi.testclient import TestClient

from demoflow import dom, model, synthesis
from demoflow.service import TEMPLATE_KIND, create_app

HR_DECISIONS = ["Ready to go", "Manual review"]


@pytest.fixture()
def data_dir(tmp_path):
    return tmp_path / "data"


@pytest.fixture()
def api(data_dir):
    with TestClient(create_app(data_dir=data_dir)) as client:
        yield client


def _define_hr(api, hr, name="HR Screening"):
    created = api.post("/automations", json={"name": name})
    assert created.status_code == 201
    automation_id = created.json()["automationId"]
    uploaded = api.post(f"/automations/{automation_id}/sample", json={
        "csv": (hr.base / "sample.csv").read_text(encoding="utf-8"),
        "decisionValues": HR_DECISIONS,
        "decisionColumn": "Decision",
    })
    assert uploaded.status_code == 200
    return automation_id


def _event_payload(world, trace, row, subdir="traces"):
    events = world.events(trace, subdir)
    refs = {e.snapshot_ref for e in events if e.snapshot_ref}
    return {
        "name": trace,
        "sampleRowIndex": row,
        "events": [e.to_doc() for e in events],
        "snapshots": {ref: world.snapshots.html(ref) for ref in refs},
    }


def _teach(api, automation_id, world, trace, row, subdir="traces"):
    scenario_id = trace.replace("_", "-")
    posted = api.post(
        f"/automations/{automation_id}/scenarios/{scenario_id}/events",
        json=_event_payload(world, trace, row, subdir),
    )
    assert posted.status_code == 200, posted.text
    return api.post(f"/automations/{automation_id}/scenarios/{scenario_id}/finish", json={})


def _teach_all(api, automation_id, hr):
    from conftest import HR_TEACH_ORDER, HR_TRACE_ROWS

    for trace in HR_TEACH_ORDER:
        finished = _teach(api, automation_id, hr, trace, HR_TRACE_ROWS[trace])
        assert finished.status_code == 200, finished.text
        assert finished.json()["merged"] is True


# --- creating automations ---

def test_create_and_list(api):
    created = api.post("/automations", json={
        "name": "HR Screening", "description": "screen candidates",
        "templateKind": TEMPLATE_KIND,
    })
    assert created.status_code == 201
    assert created.json() == {
        "automationId": "hr-screening", "name": "HR Screening", "lifecycle": "Define",
    }
    listed = api.get("/automations").json()["automations"]
    assert [a["automationId"] for a in listed] == ["hr-screening"]


def test_create_requires_a_name(api):
    assert api.post("/automations", json={"name": "   "}).status_code == 400


def test_create_rejects_duplicate_names(api):
    api.post("/automations", json={"name": "Twice Over"})
    again = api.post("/automations", json={"name": "twice over"})
    assert again.status_code == 409
    assert again.json()["error"] == "DuplicateName"


def test_create_rejects_other_templates(api):
    response = api.post("/automations", json={"name": "Odd", "templateKind": "pdf→email"})
    assert response.status_code == 409


def test_get_unknown_automation(api):
    response = api.get("/automations/nope")
    assert response.status_code == 404
    assert response.json()["error"] == "UnknownAutomation"


# --- sample upload ---

def test_sample_upload_reports_the_schema(api, hr):
    automation_id = _define_hr(api, hr)
    detail = api.get(f"/automations/{automation_id}").json()
    assert detail["rowCount"] == 6
    assert detail["schema"]["decisionColumn"] == "Decision"
    assert detail["summary"]["sampleLoaded"] is True


def test_sample_upload_rejects_bad_csv(api):
    api.post("/automations", json={"name": "Bad CSV"})
    response = api.post("/automations/bad-csv/sample", json={"csv": ""})
    assert response.status_code == 422


def test_sample_is_frozen_once_teaching_starts(api, hr):
    automation_id = _define_hr(api, hr)
    _teach(api, automation_id, hr, "manual_review1", 2)
    response = api.post(f"/automations/{automation_id}/sample",
                        json={"csv": "A\n1\n", "decisionValues": [], "decisionColumn": None})
    assert response.status_code == 409
    assert "Define" in response.json()["detail"]


# --- teaching ---

def test_posting_events_echoes_normalized_steps(api, hr):
    automation_id = _define_hr(api, hr)
    posted = api.post(
        f"/automations/{automation_id}/scenarios/mr-one/events",
        json=_event_payload(hr, "manual_review1", 2),
    )
    assert posted.status_code == 200
    body = posted.json()
    labels = [s["label"] for s in body["steps"]]
    assert labels[0] == "Recruitment"
    assert "Candidate Name" in labels
    assert body["steps"] == body["appended"]
    detail = api.get(f"/automations/{automation_id}").json()
    assert detail["lifecycle"] == "Teach"
    assert detail["drafts"] == ["mr-one"]


def test_events_can_arrive_in_batches(api, hr):
    automation_id = _define_hr(api, hr)
    payload = _event_payload(hr, "manual_review1", 2)
    # split after the typing burst so coalescing cannot rewrite the prefix
    split = next(i for i, e in enumerate(payload["events"])
                 if e["kind"] == "Click" and i > 1)
    head = dict(payload, events=payload["events"][:split])
    tail = dict(payload, events=payload["events"][split:])
    first = api.post(f"/automations/{automation_id}/scenarios/mr-one/events", json=head).json()
    second = api.post(f"/automations/{automation_id}/scenarios/mr-one/events", json=tail).json()
    assert len(second["steps"]) > len(first["steps"])
    assert second["steps"][:len(first["steps"])] == first["steps"]
    assert second["appended"] == second["steps"][len(first["steps"]):]


def test_selecting_an_object_suggests_conditions(api, hr):
    automation_id = _define_hr(api, hr)
    payload = _event_payload(hr, "manual_review1", 2)
    upto = next(i for i, e in enumerate(payload["events"]) if e["kind"] == "SelectObject")
    posted = api.post(
        f"/automations/{automation_id}/scenarios/mr-one/events",
        json=dict(payload, events=payload["events"][:upto + 1]),
    )
    body = posted.json()
    assert body["object"]["objectId"] == "candidates-table"
    assert body["suggestedConditions"][0] == "Condition Candidates table one record"
    assert len(body["suggestedConditions"]) == 3


def test_selecting_plain_markup_is_a_notice_not_an_error(api, hr):
    automation_id = _define_hr(api, hr)
    html = hr.snapshots.html("mr1-dashboard-00")
    snap = dom.parse_snapshot(html, "mr1-dashboard-00")
    heading = dom.query(snap, "h1")[0].node_id
    posted = api.post(f"/automations/{automation_id}/scenarios/odd/events", json={
        "sampleRowIndex": 0,
        "snapshots": {"mr1-dashboard-00": html},
        "events": [{"seq": 1, "kind": "SelectObject",
                    "snapshotRef": "mr1-dashboard-00", "targetNode": heading}],
    })
    assert posted.status_code == 200
    body = posted.json()
    assert "no semantic object" in body["notice"]
    assert body["appended"] == []


def test_snapshot_refs_cannot_be_redefined(api, hr):
    automation_id = _define_hr(api, hr)
    _teach(api, automation_id, hr, "manual_review1", 2)
    response = api.post(f"/automations/{automation_id}/scenarios/later/events", json={
        "sampleRowIndex": 0,
        "snapshots": {"mr1-dashboard-00": "<p>something else</p>"},
        "events": [],
    })
    assert response.status_code == 422
    assert "already recorded" in response.json()["detail"]


def test_finish_merges_and_reports_coverage(api, hr):
    automation_id = _define_hr(api, hr)
    finished = _teach(api, automation_id, hr, "manual_review1", 2)
    assert finished.status_code == 200
    body = finished.json()
    assert body["merged"] is True
    assert body["program"]["formatVersion"] == 1
    assert body["coverage"]["uncoveredDecisions"] == ["Ready to go"]
    detail = api.get(f"/automations/{automation_id}").json()
    assert detail["drafts"] == []
    assert [s["scenarioId"] for s in detail["scenarios"]] == ["manual-review1"]


def test_finish_without_an_open_scenario(api, hr):
    automation_id = _define_hr(api, hr)
    response = api.post(f"/automations/{automation_id}/scenarios/ghost/finish", json={})
    assert response.status_code == 404


def test_finish_can_append_the_decision(api, hr):
    automation_id = _define_hr(api, hr)
    payload = _event_payload(hr, "manual_review1", 2)
    # drop the recorded decision and supply it at finish time instead
    assert payload["events"][-1]["kind"] == "Decide"
    payload["events"] = payload["events"][:-1]
    api.post(f"/automations/{automation_id}/scenarios/mr-one/events", json=payload)
    finished = api.post(f"/automations/{automation_id}/scenarios/mr-one/finish",
                        json={"decision": "Manual review"})
    assert finished.status_code == 200
    assert finished.json()["merged"] is True


def test_conflicting_scenario_is_rejected_and_parked(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    before = api.get(f"/automations/{automation_id}/program").json()

    finished = _teach(api, automation_id, hr, "decision_contradiction", 0, subdir="conflicts")
    assert finished.status_code == 409
    body = finished.json()
    assert body["merged"] is False
    assert body["conflict"]["kind"] == "DecisionContradiction"
    assert body["conflict"]["position"] == 8

    # the program is exactly what it was before the bad merge
    assert api.get(f"/automations/{automation_id}/program").json() == before
    detail = api.get(f"/automations/{automation_id}").json()
    assert list(detail["conflicts"]) == ["decision-contradiction"]
    assert detail["summary"]["outstandingConflicts"] == 1

    # validation refuses to run until the conflict is dealt with
    blocked = api.post(f"/automations/{automation_id}/validate")
    assert blocked.status_code == 409

    removed = api.delete(f"/automations/{automation_id}/scenarios/decision-contradiction")
    assert removed.status_code == 200
    assert api.get(f"/automations/{automation_id}").json()["conflicts"] == {}


def test_deleting_a_merged_scenario_shrinks_the_program(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    removed = api.delete(f"/automations/{automation_id}/scenarios/ready-to-go")
    assert removed.status_code == 200
    program = api.get(f"/automations/{automation_id}/program").json()
    branches = [n for n in program["nodes"].values() if n["type"] == "branch"]
    arms = {n["objectRef"]: sorted(n["arms"]) for n in branches}
    assert arms["resume-attachment"] == ["absent"]


def test_deleting_an_unknown_scenario(api, hr):
    automation_id = _define_hr(api, hr)
    assert api.delete(f"/automations/{automation_id}/scenarios/ghost").status_code == 404


# --- program and coverage ---

def test_program_formats(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    as_json = api.get(f"/automations/{automation_id}/program").json()
    assert as_json["formatVersion"] == 1
    as_dot = api.get(f"/automations/{automation_id}/program", params={"format": "dot"})
    assert as_dot.headers["content-type"].startswith("text/plain")
    assert as_dot.text.startswith("digraph")
    assert api.get(f"/automations/{automation_id}/program",
                   params={"format": "yaml"}).status_code == 422


def test_api_program_matches_the_library_path(api, hr, hr_program):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    assert (api.get(f"/automations/{automation_id}/program").json()
            == synthesis.export_json(hr_program))


def test_coverage_endpoint_matches_the_library_path(api, hr, hr_program):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    assert (api.get(f"/automations/{automation_id}/coverage").json()
            == synthesis.coverage(hr_program, hr.schema).to_doc())


def test_coverage_needs_a_sample(api):
    api.post("/automations", json={"name": "Bare"})
    assert api.get("/automations/bare/coverage").status_code == 409


# --- simulator sessions ---

def test_simapp_upload_and_reset(api, hr):
    automation_id = _define_hr(api, hr)
    uploaded = api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)
    assert uploaded.status_code == 200
    assert uploaded.json()["records"] == 4

    view = api.post(f"/automations/{automation_id}/sim/reset", json={}).json()
    assert view["snapshotRef"] == "sim-dashboard-00"
    assert view["page"] == "dashboard"
    assert 'data-node-id="' in view["renderedHtml"]
    labels = {n["label"] for n in view["nodes"]}
    assert "Recruitment" in labels


def test_simapp_upload_rejects_bad_specs(api, hr):
    automation_id = _define_hr(api, hr)
    response = api.post(f"/automations/{automation_id}/simapp", json={"pages": {}})
    assert response.status_code == 422


def test_sim_act_walks_the_app(api, hr):
    automation_id = _define_hr(api, hr)
    api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)
    view = api.post(f"/automations/{automation_id}/sim/reset", json={}).json()
    link = next(n["nodeId"] for n in view["nodes"] if n["label"] == "Recruitment")
    after = api.post(f"/automations/{automation_id}/sim/act",
                     json={"action": "click", "nodeId": link}).json()
    assert after["page"] == "recruitment"
    assert after["snapshotRef"] == "sim-recruitment-01"


def test_sim_act_requires_a_session(api, hr):
    automation_id = _define_hr(api, hr)
    api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)
    response = api.post(f"/automations/{automation_id}/sim/act",
                        json={"action": "click", "nodeId": "n0"})
    assert response.status_code == 409


def test_sim_reset_requires_an_app(api, hr):
    automation_id = _define_hr(api, hr)
    assert api.post(f"/automations/{automation_id}/sim/reset", json={}).status_code == 409


def test_sim_act_rejects_unknown_actions(api, hr):
    automation_id = _define_hr(api, hr)
    api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)
    api.post(f"/automations/{automation_id}/sim/reset", json={})
    response = api.post(f"/automations/{automation_id}/sim/act",
                        json={"action": "hover", "nodeId": "n0"})
    assert response.status_code == 409


# --- validation over the wire ---

def _ndjson(response):
    return [json.loads(line) for line in response.text.splitlines()]


def test_validation_streams_rows_then_a_report(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)

    response = api.post(f"/automations/{automation_id}/validate")
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/x-ndjson")
    events = _ndjson(response)
    kinds = [e["kind"] for e in events]
    assert kinds.count("row") == 6
    assert kinds[-1] == "report"
    assert kinds.index("progress") == 0

    report = events[-1]["report"]
    assert report["summary"] == {"totalRows": 6, "validatedRows": 6, "failedRows": 0}
    expected_csv = (hr.base / "expected_output.csv").read_bytes().decode("utf-8")
    assert events[-1]["outputCsv"] == expected_csv

    detail = api.get(f"/automations/{automation_id}").json()
    assert detail["lifecycle"] == "Validate"
    assert detail["summary"]["validation"] == {
        "totalRows": 6, "validatedRows": 6, "failedRows": 0,
    }


def test_validation_needs_an_app_spec(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    assert api.post(f"/automations/{automation_id}/validate").status_code == 409


def test_lifecycle_advances_to_ready_after_a_clean_run(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)
    api.post(f"/automations/{automation_id}/validate")

    advanced = api.post(f"/automations/{automation_id}/lifecycle",
                        json={"target": "ReadyToDeploy"})
    assert advanced.status_code == 200
    assert advanced.json() == {"lifecycle": "ReadyToDeploy"}

    # a deployed automation does not quietly slip back into teaching
    rejected = api.post(
        f"/automations/{automation_id}/scenarios/more/events",
        json={"sampleRowIndex": 0, "events": [], "snapshots": {}},
    )
    assert rejected.status_code == 409


def test_lifecycle_rejects_unknown_stages(api, hr):
    automation_id = _define_hr(api, hr)
    response = api.post(f"/automations/{automation_id}/lifecycle",
                        json={"target": "Shipped"})
    assert response.status_code == 409


def test_lifecycle_will_not_skip_validation(api, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    response = api.post(f"/automations/{automation_id}/lifecycle",
                        json={"target": "ReadyToDeploy"})
    assert response.status_code == 409


# --- persistence across restarts ---

def test_a_restarted_service_serves_identical_state(api, data_dir, hr):
    automation_id = _define_hr(api, hr)
    _teach_all(api, automation_id, hr)
    api.post(f"/automations/{automation_id}/simapp", json=hr.simapp_doc)
    api.post(f"/automations/{automation_id}/validate")
    detail = api.get(f"/automations/{automation_id}").json()
    program = api.get(f"/automations/{automation_id}/program").json()

    with TestClient(create_app(data_dir=data_dir)) as reborn:
        assert reborn.get(f"/automations/{automation_id}").json() == detail
        assert reborn.get(f"/automations/{automation_id}/program").json() == program


def test_weather_extraction_over_the_api(api, weather):
    created = api.post("/automations", json={"name": "Weather Lookup"})
    automation_id = created.json()["automationId"]
    api.post(f"/automations/{automation_id}/sample", json={
        "csv": (weather.base / "sample.csv").read_text(encoding="utf-8"),
        "decisionValues": [],
        "decisionColumn": None,
        "extractionColumn": "Temperature",
    })
    finished = _teach(api, automation_id, weather, "weather_lookup", 0)
    assert finished.status_code == 200
    api.post(f"/automations/{automation_id}/simapp", json=weather.simapp_doc)
    events = _ndjson(api.post(f"/automations/{automation_id}/validate"))
    rows = [e for e in events if e["kind"] == "row"]
    assert [r["extracted"] for r in rows] == ["18°C", "22°C"]
