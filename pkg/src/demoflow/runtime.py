"""Replay: a simulated web application and program execution against it.

The simulated app is described by a small JSON document: named pages
holding HTML templates, a record dataset, and click transitions between
pages. Templates render "{{field}}" placeholders from the active record,
which is chosen by lookup transitions (for example matching a typed name
against the dataset). That is enough surface to replay every program this
package can synthesize and to check each sample row lands on the expected
decision or extracted value.
"""

from __future__ import annotations

import datetime as _dt
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import dom, params, semantic
from .errors import (
    DemoflowError,
    InconsistentProgram,
    SimAppSpecError,
    TransitionMissing,
    UnmatchedState,
)
from .model import EventKind, InputSchema, SampleTable
from .synthesis import (
    AutomationProgram,
    BranchNode,
    ExtractLeafNode,
    LeafNode,
    StepNode,
)

log = logging.getLogger(__name__)

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")

ProgressFn = Callable[[dict], None]


# --- simulated application ---

@dataclass(frozen=True)
class _Transition:
    page: str
    target: str
    next_page: str
    when: Optional[dict] = None


class SimApp:
    """A deterministic stand-in for the web application being automated."""

    def __init__(
        self,
        initial_page: str,
        pages: dict[str, str],
        dataset: list[dict],
        transitions: list[_Transition],
    ):
        self.initial_page = initial_page
        self.pages = pages
        self.dataset = dataset
        self.transitions = transitions

    @staticmethod
    def from_doc(doc: dict) -> "SimApp":
        if not isinstance(doc, dict):
            raise SimAppSpecError("app spec must be a JSON object")
        pages = doc.get("pages")
        if not isinstance(pages, dict) or not pages:
            raise SimAppSpecError("app spec needs a non-empty 'pages' object")
        for name, template in pages.items():
            if not isinstance(template, str):
                raise SimAppSpecError(f"page {name!r} template must be a string")
        initial = doc.get("initialPage")
        if initial not in pages:
            raise SimAppSpecError(f"initialPage {initial!r} is not a defined page")
        dataset = doc.get("dataset", [])
        if not isinstance(dataset, list) or any(not isinstance(r, dict) for r in dataset):
            raise SimAppSpecError("'dataset' must be a list of records")
        transitions: list[_Transition] = []
        for raw in doc.get("transitions", []):
            page = raw.get("page")
            if page not in pages:
                raise SimAppSpecError(f"transition on unknown page {page!r}")
            next_page = raw.get("next")
            if next_page not in pages:
                raise SimAppSpecError(f"transition to unknown page {next_page!r}")
            target = raw.get("target")
            if not target:
                raise SimAppSpecError("transition needs a 'target' selector")
            when = raw.get("when")
            if when is not None:
                _check_when(when)
            transitions.append(_Transition(page, target, next_page, when))
        return SimApp(initial, dict(pages), list(dataset), transitions)

    def session(self, ref_prefix: str = "sim-") -> "SimSession":
        return SimSession(self, ref_prefix)


def _check_when(when: dict) -> None:
    if not isinstance(when, dict):
        raise SimAppSpecError("'when' must be an object")
    if "lookup" in when:
        lookup = when["lookup"]
        if not isinstance(lookup, dict) or "value_from" not in lookup or "field" not in lookup:
            raise SimAppSpecError("lookup condition needs 'value_from' and 'field'")
        if not isinstance(when.get("found"), bool):
            raise SimAppSpecError("lookup condition needs a boolean 'found'")
    elif "record" in when:
        record = when["record"]
        if not isinstance(record, dict) or "field" not in record or "equals" not in record:
            raise SimAppSpecError("record condition needs 'field' and 'equals'")
    else:
        raise SimAppSpecError(f"unrecognized condition {sorted(when)!r}")


class SimSession:
    """One interaction run: current page, typed values, active record.

    Snapshot ids are deterministic ("<prefix><page>-<transition count>") so
    repeated validation runs produce byte-identical traces.
    """

    def __init__(self, app: SimApp, ref_prefix: str = "sim-"):
        self.app = app
        self.ref_prefix = ref_prefix
        self.page = app.initial_page
        self.active_record: Optional[dict] = None
        self.typed: dict[str, str] = {}
        self._ticks = 0
        self._cached: Optional[dom.DomSnapshot] = None

    def reset(self) -> None:
        self.page = self.app.initial_page
        self.active_record = None
        self.typed = {}
        self._ticks = 0
        self._cached = None

    @property
    def snapshot_ref(self) -> str:
        return f"{self.ref_prefix}{self.page}-{self._ticks:02d}"

    def render_html(self) -> str:
        template = self.app.pages[self.page]
        record = self.active_record or {}

        def fill(match: re.Match) -> str:
            value = record.get(match.group(1), "")
            if isinstance(value, bool):
                return "true" if value else "false"
            return str(value)

        return _PLACEHOLDER_RE.sub(fill, template)

    def snapshot(self) -> dom.DomSnapshot:
        if self._cached is None:
            self._cached = dom.parse_snapshot(self.render_html(), self.snapshot_ref)
        return self._cached

    def type_into(self, node_id: str, value: str) -> None:
        snap = self.snapshot()
        snap.node(node_id)  # raises UnknownNode for a bogus target
        self.typed[node_id] = value

    def click(self, node_id: str) -> None:
        snap = self.snapshot()
        clicked = snap.node(node_id)
        applicable: list[_Transition] = []
        for transition in self.app.transitions:
            if transition.page != self.page:
                continue
            if clicked not in dom.query(snap, transition.target):
                continue
            if self._when_holds(transition.when, snap):
                applicable.append(transition)
        if not applicable:
            raise TransitionMissing(
                f"no transition for clicking {clicked.tag!r} on page {self.page!r}"
            )
        if len(applicable) > 1:
            targets = sorted({t.next_page for t in applicable})
            raise SimAppSpecError(
                f"click on page {self.page!r} matches {len(applicable)} transitions "
                f"(to {targets}); the app spec is ambiguous"
            )
        self.page = applicable[0].next_page
        self.typed = {}
        self._ticks += 1
        self._cached = None

    def _when_holds(self, when: Optional[dict], snap: dom.DomSnapshot) -> bool:
        if when is None:
            return True
        if "lookup" in when:
            lookup = when["lookup"]
            matches = dom.query(snap, lookup["value_from"])
            value = ""
            if len(matches) == 1:
                value = self.typed.get(matches[0].node_id, "")
            hit = next(
                (r for r in self.app.dataset if str(r.get(lookup["field"], "")) == value),
                None,
            )
            if when["found"]:
                if hit is None:
                    return False
                self.active_record = hit
                return True
            if hit is not None:
                return False
            self.active_record = None
            return True
        record = when["record"]
        if self.active_record is None:
            return False
        return self.active_record.get(record["field"]) == record["equals"]


# --- program execution ---

@dataclass(frozen=True)
class TrajectoryEntry:
    node_id: str
    step_label: str
    state_taken: Optional[str] = None

    def to_doc(self) -> dict:
        doc: dict = {"nodeId": self.node_id, "stepLabel": self.step_label}
        if self.state_taken is not None:
            doc["stateTaken"] = self.state_taken
        return doc


@dataclass
class RowResult:
    row_index: int
    status: str  # "ok" or "error"
    decision: Optional[str] = None
    extracted: Optional[str] = None
    trajectory: list[TrajectoryEntry] = field(default_factory=list)
    error: Optional[str] = None

    def to_doc(self) -> dict:
        doc: dict = {
            "rowIndex": self.row_index,
            "status": self.status,
            "decision": self.decision,
            "extracted": self.extracted,
            "trajectory": [entry.to_doc() for entry in self.trajectory],
        }
        if self.error is not None:
            doc["error"] = self.error
        return doc


def execute_row(
    program: AutomationProgram,
    schema: InputSchema,
    row: dict[str, str],
    session: SimSession,
    row_index: int = 0,
    progress: Optional[ProgressFn] = None,
) -> RowResult:
    """Run one sample row through the program inside a fresh session."""
    if program.is_empty():
        raise InconsistentProgram("cannot execute an empty program")
    session.reset()
    ctx = params.row_context(list(schema.columns), row)
    result = RowResult(row_index=row_index, status="ok")

    def emit(node_id: str, label: str, status: str) -> None:
        if progress is not None:
            progress({"rowIndex": row_index, "nodeId": node_id,
                      "stepLabel": label, "status": status})

    current = program.entry
    try:
        while True:
            node = program.node(current)  # type: ignore[arg-type]
            if isinstance(node, LeafNode):
                result.decision = node.decision
                result.trajectory.append(TrajectoryEntry(current, f"Decide {node.decision}"))
                emit(current, f"Decide {node.decision}", "ok")
                return result
            if isinstance(node, ExtractLeafNode):
                snap = session.snapshot()
                target = snap.node(dom.resolve_selector(snap, node.step.selector))
                result.extracted = dom.normalize_text(target.text_content())
                result.trajectory.append(TrajectoryEntry(current, node.step.label))
                emit(current, node.step.label, "ok")
                return result
            if isinstance(node, BranchNode):
                obj = program.objects.get(node.object_ref)
                if obj is None:
                    raise InconsistentProgram(
                        f"branch {current!r} refers to unknown object {node.object_ref!r}"
                    )
                state = semantic.evaluate_state(obj, session.snapshot())
                next_id = node.arms.get(state)
                if next_id is None:
                    next_id = node.else_arm
                if next_id is None:
                    raise UnmatchedState(node.object_ref, state)
                result.trajectory.append(TrajectoryEntry(current, node.label, state))
                emit(current, node.label, "ok")
                current = next_id
                continue
            step = node.step
            if step.kind == EventKind.CLICK:
                snap = session.snapshot()
                session.click(dom.resolve_selector(snap, step.selector))
            elif step.kind == EventKind.TYPE:
                value = params.bind_value(step.binding, ctx)  # type: ignore[arg-type]
                snap = session.snapshot()
                session.type_into(dom.resolve_selector(snap, step.selector), value)
            elif step.kind == EventKind.EXTRACT:
                snap = session.snapshot()
                target = snap.node(dom.resolve_selector(snap, step.selector))
                result.extracted = dom.normalize_text(target.text_content())
            elif step.kind == EventKind.SELECT_OBJECT:
                pass  # selection introduced an object; replay has nothing to do
            result.trajectory.append(TrajectoryEntry(current, step.label))
            emit(current, step.label, "ok")
            current = node.next
    except DemoflowError as exc:
        result.status = "error"
        result.error = f"{type(exc).__name__}: {exc}"
        emit(current or "", "", "error")  # type: ignore[arg-type]
        return result


@dataclass
class ValidationReport:
    results: list[RowResult]
    generated_at: str

    @property
    def total_rows(self) -> int:
        return len(self.results)

    @property
    def validated_rows(self) -> int:
        return sum(1 for r in self.results if r.status == "ok")

    @property
    def failed_rows(self) -> int:
        return sum(1 for r in self.results if r.status != "ok")

    def to_doc(self) -> dict:
        return {
            "generatedAt": self.generated_at,
            "summary": {
                "totalRows": self.total_rows,
                "validatedRows": self.validated_rows,
                "failedRows": self.failed_rows,
            },
            "rows": [r.to_doc() for r in self.results],
        }

    @staticmethod
    def from_doc(doc: dict) -> "ValidationReport":
        results = []
        for raw in doc.get("rows", []):
            trajectory = [
                TrajectoryEntry(e["nodeId"], e["stepLabel"], e.get("stateTaken"))
                for e in raw.get("trajectory", [])
            ]
            results.append(RowResult(
                row_index=raw["rowIndex"],
                status=raw["status"],
                decision=raw.get("decision"),
                extracted=raw.get("extracted"),
                trajectory=trajectory,
                error=raw.get("error"),
            ))
        return ValidationReport(results, doc.get("generatedAt", ""))


def validate_stream(
    program: AutomationProgram,
    schema: InputSchema,
    table: SampleTable,
    app: SimApp,
    ref_prefix: str = "row",
):
    """Replay every sample row, yielding as it goes.

    Yields ("progress", dict) for each executed node, ("row", RowResult)
    after each row, and finally ("report", ValidationReport). Rows are
    isolated: each gets a fresh session, and one failing row does not stop
    the others.
    """
    results = []
    for index in range(len(table.rows)):
        session = app.session(ref_prefix=f"{ref_prefix}{index}-")
        buffered: list[dict] = []
        result = execute_row(program, schema, table.row(index), session,
                             row_index=index, progress=buffered.append)
        for event in buffered:
            yield "progress", event
        if result.status != "ok":
            log.warning("row %d failed: %s", index, result.error)
        yield "row", result
        results.append(result)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    yield "report", ValidationReport(results, stamp)


def validate_program(
    program: AutomationProgram,
    schema: InputSchema,
    table: SampleTable,
    app: SimApp,
    ref_prefix: str = "row",
    progress: Optional[ProgressFn] = None,
) -> ValidationReport:
    """Replay every sample row and collect the full report."""
    report: Optional[ValidationReport] = None
    for kind, payload in validate_stream(program, schema, table, app, ref_prefix):
        if kind == "progress" and progress is not None:
            progress(payload)  # type: ignore[arg-type]
        elif kind == "report":
            report = payload  # type: ignore[assignment]
    assert report is not None
    return report


def output_csv(report: ValidationReport, table: SampleTable) -> str:
    """The sample table with the program's outputs appended as new columns.

    Failed rows keep their input cells and leave the output cells blank.
    """
    import csv
    import io

    schema = table.schema
    header = list(schema.columns)
    if schema.extraction_column:
        header.append(schema.extraction_column)
    if schema.decision_column:
        header.append(schema.decision_column)

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    by_index = {r.row_index: r for r in report.results}
    for index, _ in enumerate(table.rows):
        row = table.row(index)
        cells = [row.get(c, "") for c in schema.columns]
        result = by_index.get(index)
        if schema.extraction_column:
            cells.append(result.extracted or "" if result else "")
        if schema.decision_column:
            cells.append(result.decision or "" if result else "")
        writer.writerow(cells)
    return buffer.getvalue()
