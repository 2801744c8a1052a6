"""Core data model: schemas, sample tables, events, steps, lifecycle.

A recorded demonstration arrives as a list of raw ActionEvents referencing
DOM snapshots. Normalization turns that into a clean list of Steps:
noise events are dropped, keystroke bursts are coalesced, targets become
robust selectors with human labels, and typed text is generalized into
parameter bindings against the demonstrated row.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import dom, params, semantic
from .errors import (
    DanglingSnapshotRef,
    DuplicateColumn,
    EmptyTable,
    GuardFailed,
    InvalidScenario,
    InvalidSchema,
    KindFieldMismatch,
    MalformedCsv,
)


class EventKind(str, Enum):
    CLICK = "Click"
    TYPE = "Type"
    EXTRACT = "Extract"
    SELECT_OBJECT = "SelectObject"
    ASSERT_STATE = "AssertState"
    DECIDE = "Decide"
    IGNORE = "Ignore"


# kinds a Step may carry (everything except noise)
STEP_KINDS = {
    EventKind.CLICK,
    EventKind.TYPE,
    EventKind.EXTRACT,
    EventKind.SELECT_OBJECT,
    EventKind.ASSERT_STATE,
    EventKind.DECIDE,
}


@dataclass(frozen=True)
class InputSchema:
    """Shape of the sample table plus the output columns to produce.

    The decision and extraction columns are outputs and must not collide
    with input columns.
    """

    columns: tuple[str, ...]
    decision_values: tuple[str, ...] = ()
    decision_column: Optional[str] = None
    extraction_column: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.columns:
            raise InvalidSchema("schema needs at least one input column")
        if any(not c for c in self.columns):
            raise InvalidSchema("column names must be non-empty")
        if len(set(self.columns)) != len(self.columns):
            raise InvalidSchema("column names must be distinct")
        if self.decision_column is not None and not self.decision_values:
            raise InvalidSchema("a decision column needs a non-empty set of decision values")
        if self.decision_column is None and self.decision_values:
            raise InvalidSchema("decision values given without a decision column")
        if len(set(self.decision_values)) != len(self.decision_values):
            raise InvalidSchema("decision values must be distinct")
        for output in (self.decision_column, self.extraction_column):
            if output is not None and output in self.columns:
                raise InvalidSchema(f"output column {output!r} collides with an input column")
        if self.decision_column is not None and self.decision_column == self.extraction_column:
            raise InvalidSchema("decision and extraction columns must differ")
        if self.decision_column is None and self.extraction_column is None:
            raise InvalidSchema("configure a decision column, an extraction column, or both")

    def to_doc(self) -> dict:
        return {
            "columns": list(self.columns),
            "decisionValues": list(self.decision_values),
            "decisionColumn": self.decision_column,
            "extractionColumn": self.extraction_column,
        }

    @staticmethod
    def from_doc(doc: dict) -> "InputSchema":
        return InputSchema(
            columns=tuple(doc["columns"]),
            decision_values=tuple(doc.get("decisionValues", [])),
            decision_column=doc.get("decisionColumn"),
            extraction_column=doc.get("extractionColumn"),
        )


@dataclass(frozen=True)
class SampleTable:
    schema: InputSchema
    rows: tuple[dict[str, str], ...]

    def row(self, index: int) -> dict[str, str]:
        return self.rows[index]

    def context(self, index: int) -> params.BindingContext:
        return params.row_context(list(self.schema.columns), self.rows[index])


def load_sample_table(
    csv_text: str,
    decision_values: list[str],
    decision_column: Optional[str],
    extraction_column: Optional[str] = None,
) -> SampleTable:
    """Parse CSV text (header row first) into a SampleTable.

    Raises MalformedCsv for structural problems, DuplicateColumn for a
    repeated header name, EmptyTable when there are no data rows.
    """
    try:
        reader = csv.reader(io.StringIO(csv_text))
        records = list(reader)
    except csv.Error as exc:
        raise MalformedCsv(f"CSV parse error: {exc}") from exc
    records = [r for r in records if r != []]
    if not records:
        raise MalformedCsv("CSV input has no header row")
    header = [name.strip() for name in records[0]]
    if any(not name for name in header):
        raise MalformedCsv("CSV header contains an empty column name")
    seen: set[str] = set()
    for name in header:
        if name in seen:
            raise DuplicateColumn(f"column {name!r} appears more than once")
        seen.add(name)
    body = records[1:]
    if not body:
        raise EmptyTable("CSV has a header but no data rows")
    rows: list[dict[str, str]] = []
    for line_number, record in enumerate(body, start=2):
        if len(record) != len(header):
            raise MalformedCsv(
                f"row {line_number} has {len(record)} cells, expected {len(header)}"
            )
        rows.append(dict(zip(header, record)))
    schema = InputSchema(
        columns=tuple(header),
        decision_values=tuple(decision_values),
        decision_column=decision_column,
        extraction_column=extraction_column,
    )
    return SampleTable(schema, tuple(rows))


# --- events ---

@dataclass(frozen=True)
class ActionEvent:
    """One raw recorded interaction, as received from a recording client."""

    seq: int
    kind: EventKind
    snapshot_ref: str
    target_node: Optional[str] = None
    typed_value: Optional[str] = None
    object_ref: Optional[str] = None
    state_name: Optional[str] = None
    decision: Optional[str] = None

    def to_doc(self) -> dict:
        doc: dict = {"seq": self.seq, "kind": self.kind.value, "snapshotRef": self.snapshot_ref}
        if self.target_node is not None:
            doc["targetNode"] = self.target_node
        if self.typed_value is not None:
            doc["typedValue"] = self.typed_value
        if self.object_ref is not None:
            doc["objectRef"] = self.object_ref
        if self.state_name is not None:
            doc["stateName"] = self.state_name
        if self.decision is not None:
            doc["decision"] = self.decision
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "ActionEvent":
        try:
            kind = EventKind(doc["kind"])
        except (KeyError, ValueError):
            raise KindFieldMismatch(f"unknown event kind {doc.get('kind')!r}") from None
        if "seq" not in doc or "snapshotRef" not in doc:
            raise KindFieldMismatch("events require seq and snapshotRef")
        return ActionEvent(
            seq=int(doc["seq"]),
            kind=kind,
            snapshot_ref=doc["snapshotRef"],
            target_node=doc.get("targetNode"),
            typed_value=doc.get("typedValue"),
            object_ref=doc.get("objectRef"),
            state_name=doc.get("stateName"),
            decision=doc.get("decision"),
        )


def _check_event_fields(event: ActionEvent) -> None:
    kind = event.kind
    need_target = kind in {EventKind.CLICK, EventKind.TYPE, EventKind.EXTRACT, EventKind.SELECT_OBJECT}
    if need_target and not event.target_node:
        raise KindFieldMismatch(f"{kind.value} event (seq {event.seq}) needs targetNode")
    if kind == EventKind.TYPE and event.typed_value is None:
        raise KindFieldMismatch(f"Type event (seq {event.seq}) needs typedValue")
    if kind == EventKind.ASSERT_STATE and (not event.object_ref or not event.state_name):
        raise KindFieldMismatch(f"AssertState event (seq {event.seq}) needs objectRef and stateName")
    if kind == EventKind.DECIDE and not event.decision:
        raise KindFieldMismatch(f"Decide event (seq {event.seq}) needs decision")
    if kind != EventKind.TYPE and event.typed_value is not None:
        raise KindFieldMismatch(f"{kind.value} event (seq {event.seq}) must not carry typedValue")
    if kind not in {EventKind.ASSERT_STATE, EventKind.SELECT_OBJECT} and event.object_ref is not None:
        raise KindFieldMismatch(f"{kind.value} event (seq {event.seq}) must not carry objectRef")
    if kind != EventKind.ASSERT_STATE and event.state_name is not None:
        raise KindFieldMismatch(f"{kind.value} event (seq {event.seq}) must not carry stateName")
    if kind != EventKind.DECIDE and event.decision is not None:
        raise KindFieldMismatch(f"{kind.value} event (seq {event.seq}) must not carry decision")


# --- steps ---

@dataclass(frozen=True)
class Step:
    """One normalized program step."""

    kind: EventKind
    label: str
    selector: Optional[dom.SelectorSpec] = None
    binding: Optional[params.Binding] = None
    extraction_target: Optional[str] = None
    condition: Optional[tuple[str, str]] = None  # (objectRef, stateName)
    decision: Optional[str] = None
    object_def: Optional[semantic.SemanticObject] = None
    source_snapshot: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in STEP_KINDS:
            raise InvalidScenario(f"steps cannot have kind {self.kind.value}")
        if not self.label:
            raise InvalidScenario("steps need a non-empty label")

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind.value, "label": self.label}
        if self.selector is not None:
            doc["selector"] = self.selector.to_doc()
        if self.binding is not None:
            doc["binding"] = self.binding.to_doc()
        if self.extraction_target is not None:
            doc["extractionTarget"] = self.extraction_target
        if self.condition is not None:
            doc["condition"] = {"objectRef": self.condition[0], "stateName": self.condition[1]}
        if self.decision is not None:
            doc["decision"] = self.decision
        if self.object_def is not None:
            doc["object"] = self.object_def.to_doc()
        if self.source_snapshot is not None:
            doc["sourceSnapshot"] = self.source_snapshot
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "Step":
        condition = None
        if doc.get("condition") is not None:
            condition = (doc["condition"]["objectRef"], doc["condition"]["stateName"])
        return Step(
            kind=EventKind(doc["kind"]),
            label=doc["label"],
            selector=dom.SelectorSpec.from_doc(doc["selector"]) if doc.get("selector") else None,
            binding=params.Binding.from_doc(doc["binding"]) if doc.get("binding") else None,
            extraction_target=doc.get("extractionTarget"),
            condition=condition,
            decision=doc.get("decision"),
            object_def=semantic.SemanticObject.from_doc(doc["object"]) if doc.get("object") else None,
            source_snapshot=doc.get("sourceSnapshot"),
        )


@dataclass(frozen=True)
class Scenario:
    """One complete demonstrated path, tied to the row it was shown on."""

    scenario_id: str
    name: str
    steps: tuple[Step, ...]
    sample_row_index: int = 0

    def objects(self) -> dict[str, semantic.SemanticObject]:
        found: dict[str, semantic.SemanticObject] = {}
        for step in self.steps:
            if step.object_def is not None:
                found[step.object_def.object_id] = step.object_def
        return found

    def decision(self) -> Optional[str]:
        for step in self.steps:
            if step.kind == EventKind.DECIDE:
                return step.decision
        return None

    def to_doc(self) -> dict:
        return {
            "scenarioId": self.scenario_id,
            "name": self.name,
            "sampleRowIndex": self.sample_row_index,
            "steps": [step.to_doc() for step in self.steps],
        }

    @staticmethod
    def from_doc(doc: dict) -> "Scenario":
        return Scenario(
            scenario_id=doc["scenarioId"],
            name=doc["name"],
            steps=tuple(Step.from_doc(s) for s in doc["steps"]),
            sample_row_index=doc.get("sampleRowIndex", 0),
        )


def validate_scenario(scenario: Scenario, schema: InputSchema) -> None:
    """Check the structural rules a finished scenario must satisfy."""
    if not scenario.steps:
        raise InvalidScenario("a scenario needs at least one step")
    decide_positions = [
        i for i, step in enumerate(scenario.steps) if step.kind == EventKind.DECIDE
    ]
    if schema.decision_column is not None:
        if len(decide_positions) != 1 or decide_positions[0] != len(scenario.steps) - 1:
            raise InvalidScenario("a scenario must end with exactly one decision step")
    else:
        if decide_positions:
            raise InvalidScenario(
                "this automation has no decision column; decision steps are invalid"
            )
        if scenario.steps[-1].kind != EventKind.EXTRACT:
            raise InvalidScenario("an extraction scenario must end with its extract step")
    known_objects = set()
    for step in scenario.steps:
        if step.object_def is not None:
            known_objects.add(step.object_def.object_id)
        if step.kind == EventKind.ASSERT_STATE:
            if step.condition is None:
                raise InvalidScenario("state assertions need a condition")
            object_ref, state = step.condition
            if object_ref not in known_objects:
                raise InvalidScenario(f"condition references unknown object {object_ref!r}")
        if step.kind == EventKind.EXTRACT and step.extraction_target != schema.extraction_column:
            raise InvalidScenario("extract steps must target the configured extraction column")
        if step.kind == EventKind.DECIDE and step.decision not in schema.decision_values:
            raise InvalidScenario(f"unknown decision value {step.decision!r}")


# --- snapshot store ---

class SnapshotStore:
    """Holds snapshot HTML by reference and parses lazily."""

    def __init__(self, documents: Optional[dict[str, str]] = None):
        self._html: dict[str, str] = dict(documents or {})
        self._parsed: dict[str, dom.DomSnapshot] = {}

    def add(self, ref: str, html: str) -> None:
        self._html[ref] = html
        self._parsed.pop(ref, None)

    def __contains__(self, ref: str) -> bool:
        return ref in self._html

    def refs(self) -> list[str]:
        return sorted(self._html)

    def html(self, ref: str) -> str:
        return self._html[ref]

    def documents(self) -> dict[str, str]:
        return dict(self._html)

    def get(self, ref: str) -> dom.DomSnapshot:
        if ref not in self._html:
            raise DanglingSnapshotRef(f"no snapshot {ref!r} in store")
        if ref not in self._parsed:
            self._parsed[ref] = dom.parse_snapshot(self._html[ref], snapshot_id=ref)
        return self._parsed[ref]


# --- normalization ---

def normalize_events(
    events: list[ActionEvent],
    snapshots: SnapshotStore,
    schema: InputSchema,
    active_row: dict[str, str],
    catalog: Optional[semantic.SemanticCatalog] = None,
    oracle: Optional[semantic.OracleConfig] = None,
    oracle_transport: Optional[semantic.Transport] = None,
) -> list[Step]:
    """Turn raw events into normalized steps.

    Noise events are dropped first, then consecutive Type events on the
    same target collapse to the final value, so interleaved focus and blur
    noise cannot split a keystroke burst. The result is stable: feeding a
    step-derived event list back through produces the same steps.
    """
    ordered = sorted(events, key=lambda e: e.seq)
    for event in ordered:
        _check_event_fields(event)
        if event.snapshot_ref not in snapshots:
            raise DanglingSnapshotRef(
                f"event seq {event.seq} references unknown snapshot {event.snapshot_ref!r}"
            )

    kept = [e for e in ordered if e.kind != EventKind.IGNORE]
    coalesced: list[ActionEvent] = []
    for event in kept:
        if (
            coalesced
            and event.kind == EventKind.TYPE
            and coalesced[-1].kind == EventKind.TYPE
            and coalesced[-1].target_node == event.target_node
        ):
            coalesced[-1] = event
        else:
            coalesced.append(event)

    ctx = params.row_context(list(schema.columns), active_row)
    registry: dict[str, semantic.SemanticObject] = {}
    steps: list[Step] = []
    for event in coalesced:
        snapshot = snapshots.get(event.snapshot_ref)
        if event.kind in {EventKind.CLICK, EventKind.TYPE, EventKind.EXTRACT}:
            node_id = event.target_node or ""
            selector = dom.generate_selector(snapshot, node_id)
            label = dom.associate_label(snapshot, node_id)
            if event.kind == EventKind.CLICK:
                steps.append(Step(
                    kind=EventKind.CLICK, label=label, selector=selector,
                    source_snapshot=event.snapshot_ref,
                ))
            elif event.kind == EventKind.TYPE:
                steps.append(Step(
                    kind=EventKind.TYPE, label=label, selector=selector,
                    binding=params.map_value(event.typed_value or "", ctx),
                    source_snapshot=event.snapshot_ref,
                ))
            else:
                if schema.extraction_column is None:
                    raise KindFieldMismatch(
                        f"Extract event (seq {event.seq}) but no extraction column is configured"
                    )
                steps.append(Step(
                    kind=EventKind.EXTRACT, label=label, selector=selector,
                    extraction_target=schema.extraction_column,
                    source_snapshot=event.snapshot_ref,
                ))
        elif event.kind == EventKind.SELECT_OBJECT:
            detected = semantic.detect_object(
                snapshot, event.target_node or "", catalog=catalog,
                oracle=oracle, transport=oracle_transport,
            )
            registry[detected.object_id] = detected
            if event.object_ref:
                registry[event.object_ref] = detected
            steps.append(Step(
                kind=EventKind.SELECT_OBJECT, label=detected.friendly_name,
                object_def=detected, source_snapshot=event.snapshot_ref,
            ))
        elif event.kind == EventKind.ASSERT_STATE:
            obj = registry.get(event.object_ref or "")
            if obj is None:
                raise KindFieldMismatch(
                    f"AssertState event (seq {event.seq}) references unknown object "
                    f"{event.object_ref!r}"
                )
            if event.state_name not in obj.state_names:
                raise KindFieldMismatch(
                    f"AssertState event (seq {event.seq}) names state {event.state_name!r}, "
                    f"not one of {', '.join(obj.state_names)}"
                )
            steps.append(Step(
                kind=EventKind.ASSERT_STATE, label=obj.friendly_name,
                condition=(obj.object_id, event.state_name or ""),
                source_snapshot=event.snapshot_ref,
            ))
        elif event.kind == EventKind.DECIDE:
            if event.decision not in schema.decision_values:
                raise KindFieldMismatch(
                    f"Decide event (seq {event.seq}) names unknown decision {event.decision!r}"
                )
            steps.append(Step(
                kind=EventKind.DECIDE, label=event.decision or "",
                decision=event.decision, source_snapshot=event.snapshot_ref,
            ))
    return steps


def steps_to_events(
    steps: list[Step],
    snapshots: SnapshotStore,
    ctx: params.BindingContext,
) -> list[ActionEvent]:
    """Rebuild an event list that normalizes back to the given steps.

    Used by tooling and round-trip tests; selectors are resolved against
    each step's source snapshot.
    """
    events: list[ActionEvent] = []
    for index, step in enumerate(steps, start=1):
        ref = step.source_snapshot or ""
        if step.kind == EventKind.CLICK:
            node_id = dom.resolve_selector(snapshots.get(ref), step.selector)  # type: ignore[arg-type]
            events.append(ActionEvent(index, EventKind.CLICK, ref, target_node=node_id))
        elif step.kind == EventKind.TYPE:
            node_id = dom.resolve_selector(snapshots.get(ref), step.selector)  # type: ignore[arg-type]
            value = params.bind_value(step.binding, ctx)  # type: ignore[arg-type]
            events.append(ActionEvent(
                index, EventKind.TYPE, ref, target_node=node_id, typed_value=value,
            ))
        elif step.kind == EventKind.EXTRACT:
            node_id = dom.resolve_selector(snapshots.get(ref), step.selector)  # type: ignore[arg-type]
            events.append(ActionEvent(index, EventKind.EXTRACT, ref, target_node=node_id))
        elif step.kind == EventKind.SELECT_OBJECT:
            anchor_id = dom.resolve_selector(snapshots.get(ref), step.object_def.anchor)  # type: ignore[union-attr]
            events.append(ActionEvent(
                index, EventKind.SELECT_OBJECT, ref, target_node=anchor_id,
            ))
        elif step.kind == EventKind.ASSERT_STATE:
            object_ref, state = step.condition  # type: ignore[misc]
            events.append(ActionEvent(
                index, EventKind.ASSERT_STATE, ref, object_ref=object_ref, state_name=state,
            ))
        else:
            events.append(ActionEvent(index, EventKind.DECIDE, ref, decision=step.decision))
    return events


# --- trace files ---

def read_trace(text: str) -> list[ActionEvent]:
    """Parse a JSON-lines trace file into events."""
    events: list[ActionEvent] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"trace line {line_number}: {exc}") from exc
        events.append(ActionEvent.from_doc(doc))
    return events


def write_trace(events: list[ActionEvent]) -> str:
    return "".join(json.dumps(e.to_doc(), ensure_ascii=False) + "\n" for e in events)


# --- lifecycle ---

class LifecycleState(str, Enum):
    DEFINE = "Define"
    TEACH = "Teach"
    VALIDATE = "Validate"
    READY_TO_DEPLOY = "ReadyToDeploy"


@dataclass(frozen=True)
class ValidationOutcome:
    total_rows: int
    validated_rows: int
    failed_rows: int


@dataclass(frozen=True)
class AutomationSummary:
    """What the lifecycle guards need to know about an automation."""

    sample_loaded: bool = False
    output_configured: bool = False
    merged_scenarios: int = 0
    outstanding_conflicts: int = 0
    validation: Optional[ValidationOutcome] = None


_FORWARD = {
    LifecycleState.DEFINE: LifecycleState.TEACH,
    LifecycleState.TEACH: LifecycleState.VALIDATE,
    LifecycleState.VALIDATE: LifecycleState.READY_TO_DEPLOY,
}


def advance_lifecycle(
    current: LifecycleState,
    target: LifecycleState,
    summary: AutomationSummary,
) -> LifecycleState:
    """Move an automation along Define, Teach, Validate, ReadyToDeploy.

    The only backward move is Validate to Teach (more demonstrations are
    needed). Each forward move has a guard; a failed guard raises
    GuardFailed with the reason.
    """
    if current == LifecycleState.VALIDATE and target == LifecycleState.TEACH:
        return LifecycleState.TEACH
    if _FORWARD.get(current) != target:
        raise GuardFailed(f"cannot move from {current.value} to {target.value}")
    if target == LifecycleState.TEACH:
        if not summary.sample_loaded:
            raise GuardFailed("teaching needs a loaded sample table")
        if not summary.output_configured:
            raise GuardFailed("teaching needs decision values or an extraction column")
    elif target == LifecycleState.VALIDATE:
        if summary.merged_scenarios < 1:
            raise GuardFailed("validation needs at least one merged scenario")
        if summary.outstanding_conflicts:
            raise GuardFailed("validation needs a conflict-free program")
    elif target == LifecycleState.READY_TO_DEPLOY:
        outcome = summary.validation
        if outcome is None:
            raise GuardFailed("deployment needs a validation run")
        if outcome.validated_rows < outcome.total_rows:
            raise GuardFailed("the latest validation did not cover every sample row")
        if outcome.failed_rows:
            raise GuardFailed("the latest validation had execution errors")
    return target
