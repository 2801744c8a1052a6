import json

import pytest

from conftest import FIXTURES, HR_TEACH_ORDER, HR_TRACE_ROWS
from demoflow import cli, model, store

HR = FIXTURES / "hr"
WEATHER = FIXTURES / "weather"


@pytest.fixture()
def data_dir(tmp_path):
    return str(tmp_path / "data")


def _define_hr(data_dir):
    return cli.main([
        "--data-dir", data_dir, "define",
        "--name", "HR Screening",
        "--csv", str(HR / "sample.csv"),
        "--decision", "Ready to go",
        "--decision", "Manual review",
        "--decision-column", "Decision",
    ])


def _teach_all(data_dir):
    for trace in HR_TEACH_ORDER:
        code = cli.main([
            "--data-dir", data_dir, "teach", "hr-screening",
            "--trace", str(HR / "traces" / f"{trace}.jsonl"),
            "--row", str(HR_TRACE_ROWS[trace]),
        ])
        assert code == 0


# --- define ---

def test_define_creates_the_record(data_dir, capsys):
    assert _define_hr(data_dir) == 0
    out = capsys.readouterr().out
    assert "hr-screening" in out
    assert "6 sample rows" in out
    record = store.Store(data_dir).load("hr-screening")
    assert record.schema.decision_values == ("Ready to go", "Manual review")


def test_define_with_a_missing_csv_file(data_dir, capsys):
    code = cli.main(["--data-dir", data_dir, "define",
                     "--name", "x", "--csv", "/no/such/file.csv"])
    assert code == 1
    assert "cannot read" in capsys.readouterr().err


def test_define_with_an_empty_csv(data_dir, tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code = cli.main(["--data-dir", data_dir, "define", "--name", "x",
                     "--csv", str(empty)])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_define_twice_is_a_domain_error(data_dir, capsys):
    _define_hr(data_dir)
    assert _define_hr(data_dir) == 2
    assert "already exists" in capsys.readouterr().err


def test_unknown_arguments_exit_one(data_dir, capsys):
    assert cli.main(["--data-dir", data_dir, "define", "--nope"]) == 1
    assert "error:" in capsys.readouterr().err


def test_a_command_is_required(capsys):
    assert cli.main([]) == 1


# --- teach ---

def test_teach_merges_and_prints_suggestions(data_dir, capsys):
    _define_hr(data_dir)
    code = cli.main([
        "--data-dir", data_dir, "teach", "hr-screening",
        "--trace", str(HR / "traces" / "manual_review1.jsonl"),
        "--row", "2",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "Merged scenario 'manual-review1'" in out
    assert "Still to demonstrate:" in out
    assert "Demonstrate Candidates table no records" in out


def test_teach_all_three_traces(data_dir, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    out = capsys.readouterr().out
    # one state remains undemonstrated even after all three recordings
    assert "Demonstrate Candidates table multiple records" in out
    record = store.Store(data_dir).load("hr-screening")
    assert len(record.scenarios) == 3
    assert record.lifecycle is model.LifecycleState.TEACH


def test_teach_unknown_automation(data_dir, capsys):
    code = cli.main(["--data-dir", data_dir, "teach", "ghost",
                     "--trace", str(HR / "traces" / "manual_review1.jsonl")])
    assert code == 2
    assert "ghost" in capsys.readouterr().err


def test_teach_conflicting_trace(data_dir, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    capsys.readouterr()
    code = cli.main([
        "--data-dir", data_dir, "teach", "hr-screening",
        "--trace", str(HR / "conflicts" / "step_mismatch.jsonl"),
        "--row", "2",
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "Conflict (StepMismatch)" in err
    record = store.Store(data_dir).load("hr-screening")
    assert "step-mismatch" in record.conflicts
    assert len(record.scenarios) == 3  # the program is untouched


# --- validate ---

def test_validate_writes_the_output_csv(data_dir, tmp_path, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    out_path = tmp_path / "out.csv"
    report_path = tmp_path / "report.json"
    code = cli.main([
        "--data-dir", data_dir, "validate", "hr-screening",
        "--simapp", str(HR / "simapp.json"),
        "--out", str(out_path),
        "--report", str(report_path),
    ])
    assert code == 0
    assert out_path.read_bytes() == (HR / "expected_output.csv").read_bytes()
    report = json.loads(report_path.read_text())
    assert report["summary"] == {"totalRows": 6, "validatedRows": 6, "failedRows": 0}
    out = capsys.readouterr().out
    assert "Validated 6/6 rows." in out
    assert "Ready to deploy." in out
    record = store.Store(data_dir).load("hr-screening")
    assert record.lifecycle is model.LifecycleState.READY_TO_DEPLOY


def test_validate_refuses_while_conflicts_are_open(data_dir, tmp_path, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    cli.main(["--data-dir", data_dir, "teach", "hr-screening",
              "--trace", str(HR / "conflicts" / "duplicate_arm.jsonl"), "--row", "2"])
    capsys.readouterr()
    code = cli.main(["--data-dir", data_dir, "validate", "hr-screening",
                     "--simapp", str(HR / "simapp.json"),
                     "--out", str(tmp_path / "out.csv")])
    assert code == 2
    assert "Unresolved conflict" in capsys.readouterr().err


def test_validate_with_invalid_simapp_json(data_dir, tmp_path, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    bad = tmp_path / "app.json"
    bad.write_text("{not json")
    code = cli.main(["--data-dir", data_dir, "validate", "hr-screening",
                     "--simapp", str(bad), "--out", str(tmp_path / "out.csv")])
    assert code == 1
    assert "not valid JSON" in capsys.readouterr().err


# --- map ---

def test_map_prints_json(data_dir, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    capsys.readouterr()
    assert cli.main(["--data-dir", data_dir, "map", "hr-screening"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["formatVersion"] == 1
    assert any(n["type"] == "branch" for n in doc["nodes"].values())


def test_map_writes_dot_to_a_file(data_dir, tmp_path, capsys):
    _define_hr(data_dir)
    _teach_all(data_dir)
    out_path = tmp_path / "map.dot"
    assert cli.main(["--data-dir", data_dir, "map", "hr-screening",
                     "--dot", "--out", str(out_path)]) == 0
    assert out_path.read_text().startswith("digraph")


def test_map_unknown_automation(data_dir, capsys):
    assert cli.main(["--data-dir", data_dir, "map", "ghost"]) == 2


# --- extraction end to end ---

def test_weather_pipeline(data_dir, tmp_path, capsys):
    code = cli.main([
        "--data-dir", data_dir, "define",
        "--name", "Weather Lookup",
        "--csv", str(WEATHER / "sample.csv"),
        "--extraction-column", "Temperature",
    ])
    assert code == 0
    code = cli.main([
        "--data-dir", data_dir, "teach", "weather-lookup",
        "--trace", str(WEATHER / "traces" / "weather_lookup.jsonl"),
    ])
    assert code == 0
    out_path = tmp_path / "out.csv"
    code = cli.main([
        "--data-dir", data_dir, "validate", "weather-lookup",
        "--simapp", str(WEATHER / "simapp.json"),
        "--out", str(out_path),
    ])
    assert code == 0
    assert out_path.read_bytes() == (WEATHER / "expected_output.csv").read_bytes()
