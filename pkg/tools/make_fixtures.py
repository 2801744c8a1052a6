#!/usr/bin/env python3
"""Regenerate the committed demo fixtures.

Builds the HR screening fixture (three teaching traces, four conflicting
traces, simulated app, sample table, expected validation output) and the
weather extraction fixture. Everything is derived by driving the simulated
apps, so node ids and snapshot refs in the traces always agree with the
committed snapshot HTML.

Usage: python3 tools/make_fixtures.py [--root fixtures]
"""

from __future__ import annotations

import argparse
import csv
import io
import json
from pathlib import Path

from demoflow import dom, model, runtime, semantic
from demoflow.model import ActionEvent, EventKind

# --- HR simulated app ---

_MENU = (
    '<nav id="menu">\n'
    '    <a id="menu-home" href="/home">Home</a>\n'
    '    <a id="menu-admin" href="/admin">Admin</a>\n'
    '    <a id="menu-recruitment" href="/recruitment">Recruitment</a>\n'
    '  </nav>'
)

_SEARCH_FORM = (
    '<h2>Candidate Search</h2>\n'
    '    <form id="search">\n'
    '      <label for="candidate-search">Candidate Name</label>\n'
    '      <input id="candidate-search" name="candidateName" placeholder="Type for hints...">\n'
    '      <button id="search-button" type="button">Search</button>\n'
    '    </form>'
)

_RESULTS_TABLE = (
    '<section id="results">\n'
    '      <h2>Candidates</h2>\n'
    '      <table id="results-table" data-role="results">\n'
    '        <thead><tr><th>Name</th><th>Vacancy</th><th>Actions</th></tr></thead>\n'
    '        <tbody>{rows}</tbody>\n'
    '      </table>\n'
    '      {note}\n'
    '    </section>'
)

_ONE_ROW = (
    '<tr><td>{{name}}</td><td>{{vacancy}}</td>'
    '<td><button id="view-details" type="button">View Details</button></td></tr>'
)


def _hr_page(main: str) -> str:
    return (
        '<html>\n<body>\n'
        '  <header><h1>Acme HR Portal</h1></header>\n'
        f'  {_MENU}\n'
        '  <main>\n'
        f'    {main}\n'
        '  </main>\n'
        '</body>\n</html>\n'
    )


def _details_page(attachment_body: str) -> str:
    return _hr_page(
        '<h2>{{name}}</h2>\n'
        '    <p>Applying for: <span id="vacancy-name">{{vacancy}}</span></p>\n'
        '    <section id="attachments" data-role="attachment" class="attachments-panel">\n'
        '      <h3>Resume</h3>\n'
        f'      {attachment_body}\n'
        '    </section>'
    )


def hr_simapp() -> dict:
    lookup = {"lookup": {"value_from": "#candidate-search", "field": "name"}}
    return {
        "initialPage": "dashboard",
        "pages": {
            "dashboard": _hr_page("<p>Welcome back. Pick a module to begin.</p>"),
            "recruitment": _hr_page(
                _SEARCH_FORM + "\n    " + _RESULTS_TABLE.format(rows="", note="")
            ),
            "results_one": _hr_page(
                _SEARCH_FORM + "\n    "
                + _RESULTS_TABLE.format(rows=_ONE_ROW, note="")
            ),
            "results_none": _hr_page(
                _SEARCH_FORM + "\n    "
                + _RESULTS_TABLE.format(
                    rows="", note='<p id="no-records-note">No Records Found</p>'
                )
            ),
            "details_resume": _details_page(
                '<a id="resume-file" class="file-link" '
                'href="/files/{{resumeFile}}">{{resumeFile}}</a>'
            ),
            "details_plain": _details_page('<p class="empty-note">No resume uploaded yet</p>'),
        },
        "dataset": [
            {"name": "John Smith", "vacancy": "Payroll Clerk", "hasResume": True,
             "resumeFile": "john_smith_cv.pdf"},
            {"name": "Alice Brown", "vacancy": "QA Analyst", "hasResume": True,
             "resumeFile": "alice_brown_cv.pdf"},
            {"name": "Bob Stone", "vacancy": "Payroll Clerk", "hasResume": False,
             "resumeFile": ""},
            {"name": "Carol White", "vacancy": "Office Manager", "hasResume": False,
             "resumeFile": ""},
        ],
        "transitions": [
            {"page": "dashboard", "target": "#menu-recruitment", "next": "recruitment"},
            {"page": "recruitment", "target": "#search-button",
             "when": {**lookup, "found": True}, "next": "results_one"},
            {"page": "recruitment", "target": "#search-button",
             "when": {**lookup, "found": False}, "next": "results_none"},
            {"page": "results_one", "target": "#view-details",
             "when": {"record": {"field": "hasResume", "equals": True}},
             "next": "details_resume"},
            {"page": "results_one", "target": "#view-details",
             "when": {"record": {"field": "hasResume", "equals": False}},
             "next": "details_plain"},
        ],
    }


HR_ROWS = [
    ("John Smith", "Referred"),
    ("Alice Brown", "Walk-in"),
    ("Bob Stone", "Agency"),
    ("Carol White", "Referred"),
    ("David Kim", "Walk-in"),
    ("Ella Fox", "Agency"),
]

READY = "Ready to go"
MANUAL = "Manual review"
HR_EXPECTED = [READY, READY, MANUAL, MANUAL, MANUAL, MANUAL]


def weather_simapp() -> dict:
    return {
        "initialPage": "home",
        "pages": {
            "home": (
                '<html>\n<body>\n'
                '  <h1>Weather Desk</h1>\n'
                '  <form id="lookup-form">\n'
                '    <label for="city-input">City</label>\n'
                '    <input id="city-input" name="city">\n'
                '    <button id="lookup-button" type="button">Search</button>\n'
                '  </form>\n'
                '</body>\n</html>\n'
            ),
            "result": (
                '<html>\n<body>\n'
                '  <h1>Weather Desk</h1>\n'
                '  <section id="conditions">\n'
                '    <h2>Current Conditions</h2>\n'
                '    <p>City <span id="city-name">{{city}}</span></p>\n'
                '    <p>Temperature <span id="current-temp">{{temperature}}</span></p>\n'
                '  </section>\n'
                '</body>\n</html>\n'
            ),
        },
        "dataset": [
            {"city": "Paris", "temperature": "18°C"},
            {"city": "Lisbon", "temperature": "22°C"},
        ],
        "transitions": [
            {"page": "home", "target": "#lookup-button",
             "when": {"lookup": {"value_from": "#city-input", "field": "city"},
                      "found": True},
             "next": "result"},
        ],
    }


# --- trace recording ---

class Recorder:
    """Drives a sim session while accumulating events and snapshots."""

    def __init__(self, app: runtime.SimApp, prefix: str):
        self.session = app.session(ref_prefix=prefix)
        self.events: list[ActionEvent] = []
        self.snapshots: dict[str, str] = {}
        self._seq = 0

    def _capture(self) -> dom.DomSnapshot:
        self.snapshots.setdefault(self.session.snapshot_ref, self.session.render_html())
        return self.session.snapshot()

    def _node(self, selector: str, index: int | None = None) -> str:
        snap = self._capture()
        matches = dom.query(snap, selector)
        if index is not None:
            return matches[index].node_id
        if len(matches) != 1:
            raise SystemExit(
                f"fixture bug: {selector!r} matched {len(matches)} nodes on "
                f"{self.session.snapshot_ref}"
            )
        return matches[0].node_id

    def _emit(self, kind: EventKind, **fields) -> None:
        self._seq += 1
        self.events.append(ActionEvent(self._seq, kind, self.session.snapshot_ref, **fields))

    def ignore(self, selector: str) -> None:
        self._emit(EventKind.IGNORE, target_node=self._node(selector))

    def click(self, selector: str, *, follow: bool = True) -> None:
        node = self._node(selector)
        self._emit(EventKind.CLICK, target_node=node)
        if follow:
            self.session.click(node)
            self._capture()

    def type_value(self, selector: str, *values: str) -> None:
        node = self._node(selector)
        for value in values:
            self._emit(EventKind.TYPE, target_node=node, typed_value=value)
        self.session.type_into(node, values[-1])

    def select_object(self, selector: str, index: int | None = None) -> semantic.SemanticObject:
        snap = self._capture()
        node = self._node(selector, index)
        self._emit(EventKind.SELECT_OBJECT, target_node=node)
        return semantic.detect_object(snap, node)

    def assert_state(self, obj: semantic.SemanticObject, state: str) -> None:
        self._emit(EventKind.ASSERT_STATE, object_ref=obj.object_id, state_name=state)

    def extract(self, selector: str) -> None:
        self._emit(EventKind.EXTRACT, target_node=self._node(selector))

    def decide(self, decision: str) -> None:
        self._emit(EventKind.DECIDE, decision=decision)


def record_hr_demo(app: runtime.SimApp, prefix: str, name: str, decision: str,
                   table_state: str) -> Recorder:
    """The shared HR walk: open recruitment, search a name, assert the
    result count; on a hit, open details and assert the resume state."""
    rec = Recorder(app, prefix)
    rec.ignore("h1")
    rec.click("#menu-recruitment")
    rec.type_value("#candidate-search", name[:2], name)
    rec.click("#search-button")
    table = rec.select_object("th", index=0)
    rec.assert_state(table, table_state)
    if table_state == "one record":
        rec.click("#view-details")
        attachment = rec.select_object("#attachments h3")
        has_file = bool(dom.query(rec.session.snapshot(), ".file-link"))
        rec.assert_state(attachment, "present" if has_file else "absent")
    rec.decide(decision)
    return rec


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_trace_dir(base: Path, traces: dict[str, Recorder]) -> None:
    snapshots: dict[str, str] = {}
    for trace_name, rec in traces.items():
        _write(base / f"{trace_name}.jsonl", model.write_trace(rec.events))
        for ref, html in rec.snapshots.items():
            snapshots[ref] = html
    for ref, html in snapshots.items():
        _write(base / "snapshots" / f"{ref}.html", html)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def build_hr(root: Path) -> None:
    doc = hr_simapp()
    app = runtime.SimApp.from_doc(doc)
    base = root / "hr"
    _write(base / "simapp.json", json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    _write(base / "sample.csv",
           _csv_text(["Candidate", "Notes"], [list(r) for r in HR_ROWS]))
    _write(base / "expected_output.csv",
           _csv_text(["Candidate", "Notes", "Decision"],
                     [[c, n, d] for (c, n), d in zip(HR_ROWS, HR_EXPECTED)]))

    demos = {
        "manual_review1": record_hr_demo(app, "mr1-", "Bob Stone", MANUAL, "one record"),
        "ready_to_go": record_hr_demo(app, "rtg-", "John Smith", READY, "one record"),
        "manual_review2": record_hr_demo(app, "mr2-", "David Kim", MANUAL, "no records"),
    }
    _write_trace_dir(base / "traces", demos)

    conflicts: dict[str, Recorder] = {}

    # (a) first step disagrees outright
    rec = Recorder(app, "xa-")
    rec.click("#menu-admin", follow=False)
    rec.decide(MANUAL)
    conflicts["step_mismatch"] = rec

    # (b) reaches the condition point but never asserts a state
    rec = Recorder(app, "xb-")
    rec.click("#menu-recruitment")
    rec.type_value("#candidate-search", "Bob Stone")
    rec.click("#search-button")
    rec.select_object("th", index=0)
    rec.click("#view-details")
    rec.decide(MANUAL)
    conflicts["divergence_without_condition"] = rec

    # (c) takes an existing arm, then walks a different continuation
    rec = Recorder(app, "xc-")
    rec.click("#menu-recruitment")
    rec.type_value("#candidate-search", "Bob Stone")
    rec.click("#search-button")
    table = rec.select_object("th", index=0)
    rec.assert_state(table, "one record")
    rec.click("#search-button", follow=False)
    rec.decide(MANUAL)
    conflicts["duplicate_arm"] = rec

    # (d) identical path to the ready_to_go leaf, opposite decision
    rec = Recorder(app, "xd-")
    rec.click("#menu-recruitment")
    rec.type_value("#candidate-search", "John Smith")
    rec.click("#search-button")
    table = rec.select_object("th", index=0)
    rec.assert_state(table, "one record")
    rec.click("#view-details")
    attachment = rec.select_object("#attachments h3")
    rec.assert_state(attachment, "present")
    rec.decide(MANUAL)
    conflicts["decision_contradiction"] = rec

    _write_trace_dir(base / "conflicts", conflicts)


def build_weather(root: Path) -> None:
    doc = weather_simapp()
    app = runtime.SimApp.from_doc(doc)
    base = root / "weather"
    _write(base / "simapp.json", json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    _write(base / "sample.csv", _csv_text(["City"], [["Paris"], ["Lisbon"]]))
    _write(base / "expected_output.csv",
           _csv_text(["City", "Temperature"], [["Paris", "18°C"], ["Lisbon", "22°C"]]))

    rec = Recorder(app, "wx-")
    rec.type_value("#city-input", "Paris")
    rec.click("#lookup-button")
    rec.extract("#current-temp")
    _write_trace_dir(base / "traces", {"weather_lookup": rec})


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", default="fixtures", help="output directory")
    args = parser.parse_args()
    root = Path(args.root)
    build_hr(root)
    build_weather(root)
    count = sum(1 for _ in root.rglob("*") if _.is_file())
    print(f"wrote {count} fixture files under {root}/")


if __name__ == "__main__":
    main()
