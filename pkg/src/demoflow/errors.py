"""Exception types shared across the package.

Every domain failure raised by this package derives from DemoflowError so
callers can catch one base class at API boundaries (CLI exit codes, HTTP
status mapping) without swallowing programming errors.
"""


class DemoflowError(Exception):
    """Base class for all domain errors raised by this package."""


# --- sample table / schema ---

class MalformedCsv(DemoflowError):
    """The CSV input could not be parsed into a rectangular table."""


class DuplicateColumn(DemoflowError):
    """A column name appears more than once in the CSV header."""


class EmptyTable(DemoflowError):
    """The CSV contained a header but zero data rows."""


class InvalidSchema(DemoflowError):
    """The schema configuration is contradictory (for example an output
    column that collides with an input column)."""


# --- events / scenarios / lifecycle ---

class DanglingSnapshotRef(DemoflowError):
    """An event references a snapshot id that is not in the snapshot store."""


class KindFieldMismatch(DemoflowError):
    """An event carries fields that do not match its kind, or is missing a
    field its kind requires."""


class InvalidScenario(DemoflowError):
    """A scenario violates its own structural rules (for example a missing
    or misplaced final decision)."""


class GuardFailed(DemoflowError):
    """A lifecycle transition was requested whose guard is not satisfied."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# --- DOM / selectors ---

class UnparseableInput(DemoflowError):
    """The HTML input was empty or not text."""


class UnknownNode(DemoflowError):
    """A node id does not exist in the snapshot."""


class ElementNotFound(DemoflowError):
    """No selector candidate matched any node."""


class AmbiguousMatch(DemoflowError):
    """Selector candidates matched nodes, but never exactly one."""


# --- semantic detection ---

class NoSemanticMatch(DemoflowError):
    """No catalog entry matches the selected element or its ancestors."""


class OracleUnreachable(DemoflowError):
    """The detection oracle endpoint could not be reached."""


class MalformedOracleResponse(DemoflowError):
    """The detection oracle answered with an unusable payload."""


class InvalidPredicate(DemoflowError):
    """A state predicate failed to parse or referenced unknown primitives
    or states."""


# --- synthesis ---

class InconsistentProgram(DemoflowError):
    """The program cannot be analysed because it is structurally broken."""


# --- parameters ---

class MissingColumn(DemoflowError):
    """A column binding refers to a column absent from the schema."""


# --- runtime ---

class UnmatchedState(DemoflowError):
    """A branch evaluated to a state with no matching arm."""

    def __init__(self, object_ref: str, state: str):
        super().__init__(f"no arm for state {state!r} of {object_ref!r}")
        self.object_ref = object_ref
        self.state = state


class TransitionMissing(DemoflowError):
    """The simulated app has no transition for the attempted interaction."""


class SimAppSpecError(DemoflowError):
    """The simulated app spec is malformed or non-deterministic."""


# --- service / persistence ---

class DuplicateName(DemoflowError):
    """An automation with this name already exists."""


class UnknownAutomation(DemoflowError):
    """No automation record exists for the given id."""
