"""demoflow: turn recorded UI demonstrations into a branching automation.

Demonstrations arrive as event traces over DOM snapshots; they normalize
into steps, merge into one program with semantic branch conditions, and
replay against a simulated app for validation. See the README for the
full walkthrough.
"""

from .errors import DemoflowError
from .model import (
    ActionEvent,
    EventKind,
    InputSchema,
    LifecycleState,
    SampleTable,
    Scenario,
    SnapshotStore,
    Step,
    advance_lifecycle,
    load_sample_table,
    normalize_events,
    read_trace,
    write_trace,
)
from .runtime import SimApp, ValidationReport, execute_row, output_csv, validate_program
from .semantic import SemanticObject, default_catalog, detect_object, evaluate_state
from .synthesis import (
    AutomationProgram,
    Conflict,
    ConflictKind,
    CoverageReport,
    coverage,
    export_dot,
    export_json,
    import_json,
    merge_scenario,
    synthesize_all,
)

__version__ = "0.1.0"

__all__ = [
    "ActionEvent",
    "AutomationProgram",
    "Conflict",
    "ConflictKind",
    "CoverageReport",
    "DemoflowError",
    "EventKind",
    "InputSchema",
    "LifecycleState",
    "SampleTable",
    "Scenario",
    "SemanticObject",
    "SimApp",
    "SnapshotStore",
    "Step",
    "ValidationReport",
    "advance_lifecycle",
    "coverage",
    "default_catalog",
    "detect_object",
    "evaluate_state",
    "execute_row",
    "export_dot",
    "export_json",
    "import_json",
    "load_sample_table",
    "merge_scenario",
    "normalize_events",
    "output_csv",
    "read_trace",
    "synthesize_all",
    "validate_program",
    "write_trace",
    "__version__",
]
