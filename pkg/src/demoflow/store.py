"""Durable state: one JSON document per automation in a data directory.

Writes go to a temp file in the same directory followed by an atomic
rename, so a crash mid-write leaves the previous document intact. The
directory comes from the DATA_DIR environment variable when not given
explicitly.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import model, runtime, semantic, synthesis
from .errors import DuplicateName, UnknownAutomation

RECORD_VERSION = 1
DEFAULT_DATA_DIR = "data"


@dataclass
class DraftScenario:
    """Events accumulated for a scenario that has not been finished yet."""

    scenario_id: str
    name: str
    sample_row_index: int = 0
    events: list[model.ActionEvent] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "scenarioId": self.scenario_id,
            "name": self.name,
            "sampleRowIndex": self.sample_row_index,
            "events": [e.to_doc() for e in self.events],
        }

    @staticmethod
    def from_doc(doc: dict) -> "DraftScenario":
        return DraftScenario(
            scenario_id=doc["scenarioId"],
            name=doc.get("name", doc["scenarioId"]),
            sample_row_index=doc.get("sampleRowIndex", 0),
            events=[model.ActionEvent.from_doc(e) for e in doc.get("events", [])],
        )


@dataclass
class AutomationRecord:
    """Everything known about one automation, as kept on disk."""

    automation_id: str
    name: str
    description: str = ""
    lifecycle: model.LifecycleState = model.LifecycleState.DEFINE
    schema: Optional[model.InputSchema] = None
    sample_csv: Optional[str] = None
    scenarios: list[model.Scenario] = field(default_factory=list)
    drafts: dict[str, DraftScenario] = field(default_factory=dict)
    conflicts: dict[str, synthesis.Conflict] = field(default_factory=dict)
    snapshots: dict[str, str] = field(default_factory=dict)
    simapp_doc: Optional[dict] = None
    last_report: Optional[dict] = None

    # --- derived views ---

    def table(self) -> Optional[model.SampleTable]:
        if self.schema is None or self.sample_csv is None:
            return None
        return model.load_sample_table(
            self.sample_csv,
            decision_values=list(self.schema.decision_values),
            decision_column=self.schema.decision_column,
            extraction_column=self.schema.extraction_column,
        )

    def snapshot_store(self) -> model.SnapshotStore:
        return model.SnapshotStore(dict(self.snapshots))

    def program(self) -> synthesis.AutomationProgram:
        """The program synthesized from the merged scenarios.

        Recomputed on demand; synthesis is deterministic, so the result is
        identical across restarts for the same scenario list.
        """
        if self.schema is None:
            return synthesis.empty_program()
        program, conflicts = synthesis.synthesize_all(list(self.scenarios), self.schema)
        if conflicts:
            # Merged scenarios were each conflict-free when accepted, so this
            # only happens if the stored document was edited by hand.
            raise RuntimeError(f"stored scenarios no longer merge cleanly: {conflicts[0].message}")
        return program

    def summary(self) -> model.AutomationSummary:
        outcome = None
        if self.last_report is not None:
            report = runtime.ValidationReport.from_doc(self.last_report)
            outcome = model.ValidationOutcome(
                total_rows=report.total_rows,
                validated_rows=report.validated_rows,
                failed_rows=report.failed_rows,
            )
        return model.AutomationSummary(
            sample_loaded=self.sample_csv is not None,
            output_configured=self.schema is not None
            and (self.schema.decision_column is not None
                 or self.schema.extraction_column is not None),
            merged_scenarios=len(self.scenarios),
            outstanding_conflicts=len(self.conflicts),
            validation=outcome,
        )

    # --- serialization ---

    def to_doc(self) -> dict:
        return {
            "formatVersion": RECORD_VERSION,
            "automationId": self.automation_id,
            "name": self.name,
            "description": self.description,
            "lifecycle": self.lifecycle.value,
            "schema": self.schema.to_doc() if self.schema else None,
            "sampleCsv": self.sample_csv,
            "scenarios": [s.to_doc() for s in self.scenarios],
            "drafts": {sid: d.to_doc() for sid, d in self.drafts.items()},
            "conflicts": {sid: c.to_doc() for sid, c in self.conflicts.items()},
            "snapshots": dict(self.snapshots),
            "simapp": self.simapp_doc,
            "lastReport": self.last_report,
        }

    @staticmethod
    def from_doc(doc: dict) -> "AutomationRecord":
        schema_doc = doc.get("schema")
        return AutomationRecord(
            automation_id=doc["automationId"],
            name=doc["name"],
            description=doc.get("description", ""),
            lifecycle=model.LifecycleState(doc.get("lifecycle", "Define")),
            schema=model.InputSchema.from_doc(schema_doc) if schema_doc else None,
            sample_csv=doc.get("sampleCsv"),
            scenarios=[model.Scenario.from_doc(s) for s in doc.get("scenarios", [])],
            drafts={sid: DraftScenario.from_doc(d) for sid, d in doc.get("drafts", {}).items()},
            conflicts={sid: synthesis.Conflict.from_doc(c)
                       for sid, c in doc.get("conflicts", {}).items()},
            snapshots=dict(doc.get("snapshots", {})),
            simapp_doc=doc.get("simapp"),
            last_report=doc.get("lastReport"),
        )


_LOCKS: dict[str, threading.RLock] = {}
_LOCKS_GUARD = threading.Lock()


def record_lock(automation_id: str) -> threading.RLock:
    """Process-wide lock serializing mutations of one automation."""
    with _LOCKS_GUARD:
        lock = _LOCKS.get(automation_id)
        if lock is None:
            lock = threading.RLock()
            _LOCKS[automation_id] = lock
        return lock


class Store:
    """Filesystem-backed collection of automation records."""

    def __init__(self, data_dir: str | os.PathLike[str] | None = None):
        if data_dir is None:
            data_dir = os.environ.get("DATA_DIR", DEFAULT_DATA_DIR)
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, automation_id: str) -> Path:
        return self.data_dir / f"{automation_id}.json"

    def create(self, name: str, description: str = "") -> AutomationRecord:
        automation_id = semantic.slugify(name)
        if not automation_id:
            raise DuplicateName(f"cannot derive an id from name {name!r}")
        if self._path(automation_id).exists():
            raise DuplicateName(f"automation {automation_id!r} already exists")
        record = AutomationRecord(automation_id=automation_id, name=name,
                                  description=description)
        self.save(record)
        return record

    def exists(self, automation_id: str) -> bool:
        return self._path(automation_id).exists()

    def load(self, automation_id: str) -> AutomationRecord:
        path = self._path(automation_id)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise UnknownAutomation(f"no automation {automation_id!r}") from None
        return AutomationRecord.from_doc(json.loads(text))

    def save(self, record: AutomationRecord) -> None:
        path = self._path(record.automation_id)
        payload = json.dumps(record.to_doc(), indent=2, ensure_ascii=False, sort_keys=True)
        fd, tmp_name = tempfile.mkstemp(
            dir=self.data_dir, prefix=f".{record.automation_id}.", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise

    def list_summaries(self) -> list[dict]:
        summaries = []
        for path in sorted(self.data_dir.glob("*.json")):
            record = AutomationRecord.from_doc(
                json.loads(path.read_text(encoding="utf-8"))
            )
            summaries.append({
                "automationId": record.automation_id,
                "name": record.name,
                "lifecycle": record.lifecycle.value,
                "mergedScenarios": len(record.scenarios),
                "outstandingConflicts": len(record.conflicts),
            })
        return summaries
