"""Compiling demonstrated scenarios into one branching automation program.

Scenarios merge by walking their shared prefix through the existing
program. State assertions become branch nodes keyed by state name, so two
demonstrations that part ways at an asserted condition turn into two arms
of the same branch. Divergence anywhere else is a conflict: the merge
reports it and leaves the program untouched.

Tolerated differences between matching steps are deliberately small:
selector candidates recorded on different pages are unioned, and literal
typed text may differ when the step is otherwise the same. Anything that
would change what the program does is a conflict, not a merge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from . import dom, params, semantic
from .errors import InconsistentProgram, InvalidScenario
from .model import EventKind, InputSchema, Scenario, Step, validate_scenario

FORMAT_VERSION = 1


class ConflictKind(str, Enum):
    DIVERGENCE_WITHOUT_CONDITION = "DivergenceWithoutCondition"
    STEP_MISMATCH = "StepMismatch"
    DUPLICATE_ARM = "DuplicateArm"
    DECISION_CONTRADICTION = "DecisionContradiction"


@dataclass(frozen=True)
class Conflict:
    kind: ConflictKind
    scenario_id: str
    message: str
    position: Optional[int] = None
    expected: Optional[str] = None
    found: Optional[str] = None
    object_ref: Optional[str] = None
    state_name: Optional[str] = None

    def to_doc(self) -> dict:
        doc: dict = {
            "kind": self.kind.value,
            "scenarioId": self.scenario_id,
            "message": self.message,
        }
        if self.position is not None:
            doc["position"] = self.position
        if self.expected is not None:
            doc["expected"] = self.expected
        if self.found is not None:
            doc["found"] = self.found
        if self.object_ref is not None:
            doc["objectRef"] = self.object_ref
        if self.state_name is not None:
            doc["stateName"] = self.state_name
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "Conflict":
        return Conflict(
            kind=ConflictKind(doc["kind"]),
            scenario_id=doc["scenarioId"],
            message=doc["message"],
            position=doc.get("position"),
            expected=doc.get("expected"),
            found=doc.get("found"),
            object_ref=doc.get("objectRef"),
            state_name=doc.get("stateName"),
        )


# --- program nodes ---

@dataclass
class StepNode:
    step: Step
    next: str


@dataclass
class BranchNode:
    object_ref: str
    label: str
    arms: dict[str, str] = field(default_factory=dict)
    else_arm: Optional[str] = None


@dataclass
class LeafNode:
    decision: str


@dataclass
class ExtractLeafNode:
    step: Step


ProgramNode = Union[StepNode, BranchNode, LeafNode, ExtractLeafNode]


class AutomationProgram:
    """A tree-shaped program: linear steps, state branches, decision leaves."""

    def __init__(self) -> None:
        self.nodes: dict[str, ProgramNode] = {}
        self.entry: Optional[str] = None
        self.objects: dict[str, semantic.SemanticObject] = {}
        self.contributing: list[str] = []
        self._counter = 0

    def is_empty(self) -> bool:
        return self.entry is None

    def _add(self, node: ProgramNode) -> str:
        node_id = f"p{self._counter}"
        self._counter += 1
        self.nodes[node_id] = node
        return node_id

    def node(self, node_id: str) -> ProgramNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise InconsistentProgram(f"dangling node reference {node_id!r}") from None

    # --- serialization ---

    def to_doc(self) -> dict:
        nodes: dict[str, dict] = {}
        for node_id, node in self.nodes.items():
            if isinstance(node, StepNode):
                nodes[node_id] = {"type": "step", "step": node.step.to_doc(), "next": node.next}
            elif isinstance(node, BranchNode):
                nodes[node_id] = {
                    "type": "branch",
                    "objectRef": node.object_ref,
                    "label": node.label,
                    "arms": dict(node.arms),
                    "elseArm": node.else_arm,
                }
            elif isinstance(node, LeafNode):
                nodes[node_id] = {"type": "leaf", "decision": node.decision}
            else:
                nodes[node_id] = {"type": "extract", "step": node.step.to_doc()}
        return {
            "formatVersion": FORMAT_VERSION,
            "entry": self.entry,
            "nodes": nodes,
            "objects": {ref: obj.to_doc() for ref, obj in self.objects.items()},
            "contributingScenarios": list(self.contributing),
        }

    @staticmethod
    def from_doc(doc: dict) -> "AutomationProgram":
        if doc.get("formatVersion") != FORMAT_VERSION:
            raise InconsistentProgram(f"unsupported program format {doc.get('formatVersion')!r}")
        program = AutomationProgram()
        program.entry = doc.get("entry")
        for node_id, raw in doc.get("nodes", {}).items():
            node_type = raw["type"]
            if node_type == "step":
                program.nodes[node_id] = StepNode(Step.from_doc(raw["step"]), raw["next"])
            elif node_type == "branch":
                program.nodes[node_id] = BranchNode(
                    raw["objectRef"], raw["label"], dict(raw["arms"]), raw.get("elseArm")
                )
            elif node_type == "leaf":
                program.nodes[node_id] = LeafNode(raw["decision"])
            elif node_type == "extract":
                program.nodes[node_id] = ExtractLeafNode(Step.from_doc(raw["step"]))
            else:
                raise InconsistentProgram(f"unknown node type {node_type!r}")
        program.objects = {
            ref: semantic.SemanticObject.from_doc(obj)
            for ref, obj in doc.get("objects", {}).items()
        }
        program.contributing = list(doc.get("contributingScenarios", []))
        numeric = [int(i[1:]) for i in program.nodes if i.startswith("p") and i[1:].isdigit()]
        program._counter = max(numeric) + 1 if numeric else 0
        return program

    def copy(self) -> "AutomationProgram":
        return AutomationProgram.from_doc(self.to_doc())

    def canonical_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def empty_program() -> AutomationProgram:
    return AutomationProgram()


# --- step matching ---

def _bindings_compatible(a: Optional[params.Binding], b: Optional[params.Binding]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if a.kind != b.kind:
        return False
    if a.kind == params.COLUMN:
        return a.value == b.value
    return True  # literals may differ in text; the first demonstration wins


def _steps_match(existing: Step, candidate: Step) -> bool:
    if existing.kind != candidate.kind or existing.label != candidate.label:
        return False
    if existing.kind == EventKind.TYPE:
        return _bindings_compatible(existing.binding, candidate.binding)
    if existing.kind == EventKind.EXTRACT:
        return existing.extraction_target == candidate.extraction_target
    return True


def _merge_selectors(
    existing: Optional[dom.SelectorSpec], incoming: Optional[dom.SelectorSpec]
) -> Optional[dom.SelectorSpec]:
    if existing is None or incoming is None:
        return existing
    candidates = list(existing.candidates)
    for candidate in incoming.candidates:
        if candidate not in candidates:
            candidates.append(candidate)
    return dom.SelectorSpec(tuple(candidates), existing.chosen, existing.scope)


def _absorb(node: StepNode, incoming: Step) -> None:
    node.step = Step(
        kind=node.step.kind,
        label=node.step.label,
        selector=_merge_selectors(node.step.selector, incoming.selector),
        binding=node.step.binding,
        extraction_target=node.step.extraction_target,
        condition=node.step.condition,
        decision=node.step.decision,
        object_def=node.step.object_def,
        source_snapshot=node.step.source_snapshot,
    )


def _describe(step: Optional[Step]) -> str:
    if step is None:
        return "end of scenario"
    if step.kind == EventKind.ASSERT_STATE and step.condition is not None:
        return f"condition {step.label} = {step.condition[1]}"
    if step.kind == EventKind.DECIDE:
        return f"decision {step.decision}"
    if step.kind == EventKind.TYPE and step.binding is not None:
        if step.binding.kind == params.COLUMN:
            return f"Type {step.label} from column {step.binding.value}"
        return f"Type {step.label} (fixed text)"
    return f"{step.kind.value} {step.label}"


def _describe_node(node: ProgramNode) -> str:
    if isinstance(node, StepNode):
        return _describe(node.step)
    if isinstance(node, BranchNode):
        return f"condition on {node.label}"
    if isinstance(node, LeafNode):
        return f"decision {node.decision}"
    return _describe(node.step)


# --- merging ---

def _build_tail(program: AutomationProgram, steps: list[Step]) -> str:
    """Append a fresh chain for the remaining steps, returning its entry id."""
    if not steps:
        raise InvalidScenario("cannot attach an empty continuation")
    step = steps[0]
    rest = steps[1:]
    if step.kind == EventKind.DECIDE:
        return program._add(LeafNode(step.decision or ""))
    if step.kind == EventKind.ASSERT_STATE:
        object_ref, state = step.condition  # type: ignore[misc]
        branch = BranchNode(object_ref, step.label)
        branch.arms[state] = _build_tail(program, rest)
        return program._add(branch)
    if step.kind == EventKind.EXTRACT and not rest:
        return program._add(ExtractLeafNode(step))
    return program._add(StepNode(step, _build_tail(program, rest)))


def merge_scenario(
    program: AutomationProgram, scenario: Scenario, schema: InputSchema
) -> tuple[AutomationProgram, Optional[Conflict]]:
    """Merge one scenario into a program.

    Returns (merged program, None) on success, or (the original program
    object, conflict) on failure; a conflicting merge never mutates the
    input, so serialized state is bit-identical afterwards.
    """
    validate_scenario(scenario, schema)
    steps = list(scenario.steps)

    work = program.copy()

    if work.is_empty():
        work.entry = _build_tail(work, steps)
        _adopt(work, scenario)
        return work, None

    def conflict(
        kind: ConflictKind,
        position: int,
        expected: str,
        found: str,
        arm: Optional[tuple[str, str]],
    ) -> tuple[AutomationProgram, Optional[Conflict]]:
        object_ref, state = arm if arm else (None, None)
        return program, Conflict(
            kind=kind,
            scenario_id=scenario.scenario_id,
            message=f"at step {position}: expected {expected}, found {found}",
            position=position,
            expected=expected,
            found=found,
            object_ref=object_ref,
            state_name=state,
        )

    current = work.entry
    index = 0
    taken_arm: Optional[tuple[str, str]] = None  # innermost pre-existing arm we entered
    while True:
        node = work.node(current)  # type: ignore[arg-type]
        step = steps[index] if index < len(steps) else None

        if isinstance(node, LeafNode):
            if step is not None and step.kind == EventKind.DECIDE:
                if step.decision == node.decision:
                    _adopt(work, scenario)
                    return work, None
                return conflict(
                    ConflictKind.DECISION_CONTRADICTION, index,
                    f"decision {node.decision}", f"decision {step.decision}", taken_arm,
                )
            kind = ConflictKind.DUPLICATE_ARM if taken_arm else ConflictKind.STEP_MISMATCH
            return conflict(kind, index, _describe_node(node), _describe(step), taken_arm)

        if isinstance(node, ExtractLeafNode):
            if step is not None and step.kind == EventKind.EXTRACT and _steps_match(node.step, step):
                if index == len(steps) - 1:
                    _adopt(work, scenario)
                    return work, None
                return conflict(
                    ConflictKind.DUPLICATE_ARM if taken_arm else ConflictKind.STEP_MISMATCH,
                    index + 1, "end of program", _describe(steps[index + 1]), taken_arm,
                )
            kind = ConflictKind.DUPLICATE_ARM if taken_arm else ConflictKind.STEP_MISMATCH
            return conflict(kind, index, _describe_node(node), _describe(step), taken_arm)

        if isinstance(node, BranchNode):
            if step is None or step.kind != EventKind.ASSERT_STATE:
                return conflict(
                    ConflictKind.DIVERGENCE_WITHOUT_CONDITION, index,
                    _describe_node(node), _describe(step), taken_arm,
                )
            if step.label != node.label:
                kind = ConflictKind.DUPLICATE_ARM if taken_arm else ConflictKind.STEP_MISMATCH
                return conflict(kind, index, _describe_node(node), _describe(step), taken_arm)
            state = step.condition[1]  # type: ignore[index]
            if state in node.arms:
                taken_arm = (node.object_ref, state)
                current = node.arms[state]
                index += 1
                continue
            if index + 1 >= len(steps):
                return conflict(
                    ConflictKind.DIVERGENCE_WITHOUT_CONDITION, index,
                    "steps after the new condition arm", "end of scenario", taken_arm,
                )
            node.arms[state] = _build_tail(work, steps[index + 1:])
            _adopt(work, scenario)
            return work, None

        # linear step node
        if step is None:
            kind = ConflictKind.DUPLICATE_ARM if taken_arm else ConflictKind.STEP_MISMATCH
            return conflict(kind, index, _describe_node(node), _describe(step), taken_arm)
        if step.kind == EventKind.ASSERT_STATE:
            return conflict(
                ConflictKind.DIVERGENCE_WITHOUT_CONDITION, index,
                _describe_node(node), _describe(step), taken_arm,
            )
        if not _steps_match(node.step, step):
            kind = ConflictKind.DUPLICATE_ARM if taken_arm else ConflictKind.STEP_MISMATCH
            return conflict(kind, index, _describe_node(node), _describe(step), taken_arm)
        _absorb(node, step)
        current = node.next
        index += 1


def _adopt(program: AutomationProgram, scenario: Scenario) -> None:
    for object_id, obj in scenario.objects().items():
        program.objects.setdefault(object_id, obj)
    if scenario.scenario_id not in program.contributing:
        program.contributing.append(scenario.scenario_id)


def synthesize_all(
    scenarios: list[Scenario], schema: InputSchema
) -> tuple[AutomationProgram, list[Conflict]]:
    """Fold scenarios into one program in order, skipping conflicting ones."""
    program = empty_program()
    conflicts: list[Conflict] = []
    for scenario in scenarios:
        program, conflict = merge_scenario(program, scenario, schema)
        if conflict is not None:
            conflicts.append(conflict)
    return program, conflicts


# --- coverage ---

@dataclass(frozen=True)
class Suggestion:
    kind: str  # "decision" or "state"
    target: str
    text: str
    path_prefix: tuple[str, ...] = ()
    object_ref: Optional[str] = None

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind, "target": self.target, "text": self.text,
                     "pathPrefix": list(self.path_prefix)}
        if self.object_ref is not None:
            doc["objectRef"] = self.object_ref
        return doc


@dataclass(frozen=True)
class CoverageReport:
    uncovered_decisions: tuple[str, ...]
    uncovered_states: tuple[tuple[str, str], ...]
    suggestions: tuple[Suggestion, ...]

    def complete(self) -> bool:
        return not self.uncovered_decisions and not self.uncovered_states

    def to_doc(self) -> dict:
        return {
            "uncoveredDecisions": list(self.uncovered_decisions),
            "uncoveredStates": [
                {"objectRef": ref, "stateName": state} for ref, state in self.uncovered_states
            ],
            "suggestions": [s.to_doc() for s in self.suggestions],
            "complete": self.complete(),
        }


def coverage(program: AutomationProgram, schema: InputSchema) -> CoverageReport:
    """What has not been demonstrated yet.

    Uncovered decisions are schema decision values with no leaf; uncovered
    states compare each branch's arms against its object's full state set
    (an else arm covers the remainder). Suggestions list decisions first,
    then states in program path order.
    """
    decisions_seen: set[str] = set()
    branch_walk: list[tuple[BranchNode, tuple[str, ...]]] = []

    if not program.is_empty():
        seen_nodes: set[str] = set()

        def walk(node_id: str, prefix: tuple[str, ...]) -> None:
            if node_id in seen_nodes:
                raise InconsistentProgram(f"node {node_id!r} reached twice; program is not a tree")
            seen_nodes.add(node_id)
            node = program.node(node_id)
            if isinstance(node, LeafNode):
                decisions_seen.add(node.decision)
                return
            if isinstance(node, ExtractLeafNode):
                return
            if isinstance(node, StepNode):
                walk(node.next, prefix + (node.step.label,))
                return
            branch_walk.append((node, prefix))
            for state, arm in node.arms.items():
                walk(arm, prefix + (f"{node.label}: {state}",))
            if node.else_arm is not None:
                walk(node.else_arm, prefix + (f"{node.label}: else",))

        walk(program.entry, ())  # type: ignore[arg-type]

    uncovered_decisions = tuple(d for d in schema.decision_values if d not in decisions_seen)

    uncovered_states: list[tuple[str, str]] = []
    state_suggestions: list[Suggestion] = []
    for node, prefix in branch_walk:
        if node.else_arm is not None:
            continue
        obj = program.objects.get(node.object_ref)
        state_names = obj.state_names if obj else ()
        for state in state_names:
            if state not in node.arms:
                uncovered_states.append((node.object_ref, state))
                state_suggestions.append(Suggestion(
                    kind="state",
                    target=state,
                    text=f"Demonstrate {node.label} {state}",
                    path_prefix=prefix,
                    object_ref=node.object_ref,
                ))

    suggestions = tuple(
        [Suggestion(kind="decision", target=d,
                    text=f"Demonstrate a scenario that ends with decision '{d}'")
         for d in uncovered_decisions]
        + state_suggestions
    )
    return CoverageReport(uncovered_decisions, tuple(uncovered_states), suggestions)


# --- exports ---

def export_json(program: AutomationProgram) -> dict:
    return program.to_doc()


def import_json(doc: dict) -> AutomationProgram:
    return AutomationProgram.from_doc(doc)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(program: AutomationProgram) -> str:
    """Render the program as a Graphviz digraph: boxes for steps, diamonds
    for conditions, filled ovals for decision leaves."""
    lines = ["digraph automation {", "  rankdir=TB;"]
    for node_id, node in program.nodes.items():
        if isinstance(node, StepNode):
            lines.append(f'  "{node_id}" [shape=box, label="{_dot_escape(node.step.label)}"];')
        elif isinstance(node, BranchNode):
            lines.append(
                f'  "{node_id}" [shape=diamond, style=filled, fillcolor="#e7dbf7", '
                f'label="{_dot_escape(node.label)}"];'
            )
        elif isinstance(node, LeafNode):
            lines.append(
                f'  "{node_id}" [shape=oval, style=filled, fillcolor="#d8f0d8", '
                f'label="{_dot_escape(node.decision)}"];'
            )
        else:
            lines.append(
                f'  "{node_id}" [shape=oval, style=filled, fillcolor="#d8e8f8", '
                f'label="{_dot_escape(node.step.label)}"];'
            )
    for node_id, node in program.nodes.items():
        if isinstance(node, StepNode):
            lines.append(f'  "{node_id}" -> "{node.next}";')
        elif isinstance(node, BranchNode):
            for state, arm in node.arms.items():
                lines.append(f'  "{node_id}" -> "{arm}" [label="{_dot_escape(state)}"];')
            if node.else_arm is not None:
                lines.append(f'  "{node_id}" -> "{node.else_arm}" [label="else"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- structural comparison ---

def _step_signature(step: Step) -> tuple:
    selector_sig = None
    if step.selector is not None:
        selector_sig = frozenset(
            json.dumps(c, sort_keys=True) for c in step.selector.to_doc()["candidates"]
        )
    return (
        step.kind.value,
        step.label,
        step.binding.to_doc()["kind"] if step.binding else None,
        step.binding.value if step.binding and step.binding.kind == params.COLUMN else None,
        step.extraction_target,
        step.condition,
        step.decision,
        step.object_def.object_id if step.object_def else None,
        selector_sig,
    )


def iso_signature(program: AutomationProgram) -> tuple:
    """A canonical form that ignores node ids, arm insertion order, selector
    candidate order, and which scenario contributed first. Two programs
    built from the same scenario set in any order share this signature."""
    if program.is_empty():
        return ("empty",)

    def sig(node_id: str) -> tuple:
        node = program.node(node_id)
        if isinstance(node, LeafNode):
            return ("leaf", node.decision)
        if isinstance(node, ExtractLeafNode):
            return ("extract", _step_signature(node.step))
        if isinstance(node, StepNode):
            return ("step", _step_signature(node.step), sig(node.next))
        arms = tuple(sorted((state, sig(arm)) for state, arm in node.arms.items()))
        else_sig = sig(node.else_arm) if node.else_arm is not None else None
        return ("branch", node.object_ref, arms, else_sig)

    return sig(program.entry)  # type: ignore[arg-type]
