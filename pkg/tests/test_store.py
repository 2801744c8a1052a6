import json

import pytest

from demoflow import model, store, synthesis
from demoflow.errors import DuplicateName, UnknownAutomation


@pytest.fixture()
def fresh(tmp_path):
    return store.Store(tmp_path / "data")


def _populated(hr, hr_scenarios):
    record = store.AutomationRecord(automation_id="hr-screening", name="HR screening",
                                    description="walks the recruitment flow")
    record.schema = hr.schema
    record.sample_csv = (hr.base / "sample.csv").read_text(encoding="utf-8")
    record.scenarios = list(hr_scenarios)
    record.snapshots = {ref: hr.snapshots.html(ref) for ref in hr.snapshots.refs()}
    record.simapp_doc = hr.simapp_doc
    record.lifecycle = model.LifecycleState.TEACH
    return record


# --- creating records ---

def test_create_slugs_the_name_and_writes_a_file(fresh):
    record = fresh.create("HR Candidate Screening", description="demo")
    assert record.automation_id == "hr-candidate-screening"
    assert record.lifecycle is model.LifecycleState.DEFINE
    assert (fresh.data_dir / "hr-candidate-screening.json").is_file()
    assert fresh.exists("hr-candidate-screening")


def test_create_rejects_a_name_that_slugs_to_an_existing_id(fresh):
    fresh.create("Weather Lookup")
    with pytest.raises(DuplicateName):
        fresh.create("weather   lookup!")


def test_unpronounceable_names_fall_back_to_a_generic_id(fresh):
    assert fresh.create("***").automation_id == "object"


def test_load_unknown_id(fresh):
    with pytest.raises(UnknownAutomation, match="missing-thing"):
        fresh.load("missing-thing")


# --- persistence round trips ---

def test_fresh_record_round_trips(fresh):
    fresh.create("Blank Slate")
    loaded = fresh.load("blank-slate")
    assert loaded.name == "Blank Slate"
    assert loaded.schema is None
    assert loaded.scenarios == []
    assert loaded.summary().sample_loaded is False


def test_populated_record_round_trips(fresh, hr, hr_scenarios):
    record = _populated(hr, hr_scenarios)
    record.drafts["wip"] = store.DraftScenario(
        scenario_id="wip", name="unfinished", sample_row_index=1,
        events=hr.events("ready_to_go")[:3],
    )
    fresh.save(record)
    loaded = fresh.load("hr-screening")
    assert loaded.to_doc() == record.to_doc()
    assert loaded.lifecycle is model.LifecycleState.TEACH
    assert loaded.drafts["wip"].events[0].kind == hr.events("ready_to_go")[0].kind


def test_saving_twice_overwrites_in_place(fresh):
    record = fresh.create("Twice")
    record.description = "updated"
    fresh.save(record)
    assert fresh.load("twice").description == "updated"
    # the atomic-rename dance never leaves temp files behind
    assert [p.name for p in fresh.data_dir.iterdir()] == ["twice.json"]


def test_stored_documents_are_stable_json(fresh, hr, hr_scenarios):
    fresh.save(_populated(hr, hr_scenarios))
    first = (fresh.data_dir / "hr-screening.json").read_bytes()
    fresh.save(fresh.load("hr-screening"))
    assert (fresh.data_dir / "hr-screening.json").read_bytes() == first


def test_data_dir_comes_from_the_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DATA_DIR", str(tmp_path / "from-env"))
    implicit = store.Store()
    assert implicit.data_dir == tmp_path / "from-env"
    assert implicit.data_dir.is_dir()


# --- derived views ---

def test_table_requires_schema_and_csv(fresh, hr, hr_scenarios):
    assert fresh.create("Empty").table() is None
    record = _populated(hr, hr_scenarios)
    table = record.table()
    assert len(table.rows) == 6
    assert table.schema.decision_column == "Decision"


def test_program_is_recomputed_from_scenarios(hr, hr_scenarios, hr_program):
    record = _populated(hr, hr_scenarios)
    assert record.program().canonical_json() == hr_program.canonical_json()


def test_program_of_a_schemaless_record_is_empty():
    record = store.AutomationRecord(automation_id="x", name="x")
    assert record.program().is_empty()


def test_hand_edited_scenarios_fail_loudly(hr, hr_scenarios):
    record = _populated(hr, hr_scenarios)
    # append a copy of the first scenario whose decision was flipped by hand;
    # it walks the same path, so the stored set now contradicts itself
    first = record.scenarios[0]
    steps = list(first.steps)
    steps[-1] = model.Step(kind=model.EventKind.DECIDE, label="Ready to go",
                           decision="Ready to go")
    record.scenarios.append(model.Scenario(
        scenario_id="edited-copy", name="edited-copy", steps=tuple(steps),
        sample_row_index=first.sample_row_index,
    ))
    with pytest.raises(RuntimeError, match="no longer merge"):
        record.program()


def test_summary_counts_scenarios_and_conflicts(hr, hr_scenarios):
    record = _populated(hr, hr_scenarios)
    record.conflicts["bad-trace"] = synthesis.Conflict(
        kind=synthesis.ConflictKind.STEP_MISMATCH, scenario_id="bad-trace",
        position=0, expected="Click A", found="Click B",
        message="steps disagree at position 0",
    )
    summary = record.summary()
    assert summary.merged_scenarios == 3
    assert summary.outstanding_conflicts == 1
    assert summary.sample_loaded and summary.output_configured
    assert summary.validation is None


def test_summary_reports_the_last_validation(hr, hr_scenarios):
    record = _populated(hr, hr_scenarios)
    record.last_report = {
        "generatedAt": "2026-01-01T00:00:00+00:00",
        "rows": [{"rowIndex": 0, "status": "ok", "decision": "Ready to go",
                  "extracted": None, "trajectory": []}],
    }
    outcome = record.summary().validation
    assert (outcome.total_rows, outcome.validated_rows, outcome.failed_rows) == (1, 1, 0)


# --- listings and locks ---

def test_list_summaries_sorted_by_id(fresh):
    fresh.create("Zebra Flow")
    fresh.create("Alpha Flow")
    listed = fresh.list_summaries()
    assert [s["automationId"] for s in listed] == ["alpha-flow", "zebra-flow"]
    assert listed[0] == {
        "automationId": "alpha-flow",
        "name": "Alpha Flow",
        "lifecycle": "Define",
        "mergedScenarios": 0,
        "outstandingConflicts": 0,
    }


def test_record_lock_is_per_automation_and_reentrant():
    a = store.record_lock("same-id")
    assert store.record_lock("same-id") is a
    assert store.record_lock("other-id") is not a
    with a:
        with a:  # reentrant, no deadlock
            pass
