"""Shared fixtures: the committed HR and weather demo data, preloaded."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import pytest

from demoflow import model, synthesis

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

HR_TRACE_ROWS = {
    "manual_review1": 2,
    "ready_to_go": 0,
    "manual_review2": 4,
}
HR_TEACH_ORDER = ["manual_review1", "ready_to_go", "manual_review2"]
HR_CONFLICT_ROWS = {
    "step_mismatch": 2,
    "divergence_without_condition": 2,
    "duplicate_arm": 2,
    "decision_contradiction": 0,
}


def load_snapshot_dir(directory: Path, store: model.SnapshotStore) -> None:
    for path in sorted(directory.glob("*.html")):
        if path.stem not in store:
            store.add(path.stem, path.read_text(encoding="utf-8"))


@dataclass
class World:
    """One fixture bundle: schema, sample rows, snapshots, traces."""

    base: Path
    schema: model.InputSchema
    table: model.SampleTable
    snapshots: model.SnapshotStore
    simapp_doc: dict

    def events(self, trace: str, subdir: str = "traces") -> list[model.ActionEvent]:
        return model.read_trace((self.base / subdir / f"{trace}.jsonl").read_text(encoding="utf-8"))

    def scenario(self, trace: str, row_index: int, subdir: str = "traces") -> model.Scenario:
        steps = model.normalize_events(
            self.events(trace, subdir), self.snapshots, self.schema, self.table.row(row_index)
        )
        return model.Scenario(
            scenario_id=trace.replace("_", "-"),
            name=trace,
            steps=tuple(steps),
            sample_row_index=row_index,
        )


def _load_world(base: Path, **schema_kwargs) -> World:
    table = model.load_sample_table((base / "sample.csv").read_text(encoding="utf-8"),
                                    **schema_kwargs)
    snapshots = model.SnapshotStore()
    load_snapshot_dir(base / "traces" / "snapshots", snapshots)
    conflict_snaps = base / "conflicts" / "snapshots"
    if conflict_snaps.is_dir():
        load_snapshot_dir(conflict_snaps, snapshots)
    return World(
        base=base,
        schema=table.schema,
        table=table,
        snapshots=snapshots,
        simapp_doc=json.loads((base / "simapp.json").read_text(encoding="utf-8")),
    )


@pytest.fixture(scope="session")
def hr() -> World:
    return _load_world(
        FIXTURES / "hr",
        decision_values=["Ready to go", "Manual review"],
        decision_column="Decision",
    )


@pytest.fixture(scope="session")
def weather() -> World:
    return _load_world(FIXTURES / "weather", decision_values=[], decision_column=None,
                       extraction_column="Temperature")


@pytest.fixture(scope="session")
def hr_scenarios(hr: World) -> list[model.Scenario]:
    return [hr.scenario(name, HR_TRACE_ROWS[name]) for name in HR_TEACH_ORDER]


@pytest.fixture(scope="session")
def hr_program(hr: World, hr_scenarios) -> synthesis.AutomationProgram:
    program, conflicts = synthesis.synthesize_all(hr_scenarios, hr.schema)
    assert conflicts == []
    return program
