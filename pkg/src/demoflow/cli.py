"""Command line driver for the whole pipeline.

Works against the same data directory layout as the service, so the two
can be mixed freely: define an automation here, teach it from trace files,
then open the console against the service and watch the same record.

Exit codes are part of the contract: 0 on success, 1 for I/O or usage
problems, 2 for domain failures (merge conflicts, lifecycle guards,
unknown decisions).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import model, runtime, semantic, store, synthesis
from .errors import (
    DemoflowError,
    DuplicateColumn,
    EmptyTable,
    InvalidSchema,
    MalformedCsv,
    UnparseableInput,
)

log = logging.getLogger(__name__)

_INPUT_ERRORS = (MalformedCsv, DuplicateColumn, EmptyTable, InvalidSchema, UnparseableInput)


class CliError(Exception):
    """A problem with how the command was invoked; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise CliError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="demoflow", description="Teach automations by demonstration.")
    parser.add_argument("--data-dir", default=None,
                        help="record directory (default: $DATA_DIR or ./data)")
    sub = parser.add_subparsers(dest="command", required=True)

    define = sub.add_parser("define", help="create an automation from a sample CSV")
    define.add_argument("--name", required=True)
    define.add_argument("--description", default="")
    define.add_argument("--csv", required=True, help="sample table path")
    define.add_argument("--decision", action="append", default=[],
                        help="allowed decision value (repeatable)")
    define.add_argument("--decision-column", default=None)
    define.add_argument("--extraction-column", default=None)

    teach = sub.add_parser("teach", help="merge a recorded trace into the program")
    teach.add_argument("automation_id")
    teach.add_argument("--trace", required=True, help="JSON-lines event trace")
    teach.add_argument("--snapshots", default=None,
                       help="directory of <ref>.html files (default: 'snapshots' next to the trace)")
    teach.add_argument("--name", default=None, help="scenario name (default: trace file stem)")
    teach.add_argument("--row", type=int, default=0, help="sample row the demo used")
    teach.add_argument("--decision", default=None,
                       help="decision to record if the trace does not end with one")

    validate = sub.add_parser("validate", help="replay the program over every sample row")
    validate.add_argument("automation_id")
    validate.add_argument("--simapp", required=True, help="simulated app spec (JSON)")
    validate.add_argument("--out", required=True, help="where to write the output CSV")
    validate.add_argument("--report", default=None, help="optional JSON report path")

    map_cmd = sub.add_parser("map", help="print the automation map")
    map_cmd.add_argument("automation_id")
    map_cmd.add_argument("--dot", action="store_true", help="Graphviz instead of JSON")
    map_cmd.add_argument("--out", default=None, help="write to a file instead of stdout")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--bind", default=None, help="host:port (default: $BIND_ADDR or 127.0.0.1:8000)")

    return parser


def _read_file(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {what} {path!r}: {exc}") from exc


def cmd_define(args: argparse.Namespace) -> int:
    records = store.Store(args.data_dir)
    csv_text = _read_file(args.csv, "sample CSV")
    table = model.load_sample_table(
        csv_text,
        decision_values=args.decision,
        decision_column=args.decision_column,
        extraction_column=args.extraction_column,
    )
    record = records.create(args.name, args.description)
    record.schema = table.schema
    record.sample_csv = csv_text
    records.save(record)
    print(f"Created automation '{record.automation_id}' "
          f"({len(table.schema.columns)} columns, {len(table.rows)} sample rows).")
    return 0


def _load_snapshot_dir(record: store.AutomationRecord, directory: Path) -> int:
    loaded = 0
    if not directory.is_dir():
        return 0
    for path in sorted(directory.glob("*.html")):
        ref = path.stem
        if ref not in record.snapshots:
            record.snapshots[ref] = path.read_text(encoding="utf-8")
            loaded += 1
    return loaded


def cmd_teach(args: argparse.Namespace) -> int:
    records = store.Store(args.data_dir)
    with store.record_lock(args.automation_id):
        record = records.load(args.automation_id)
        if record.lifecycle != model.LifecycleState.TEACH:
            record.lifecycle = model.advance_lifecycle(
                record.lifecycle, model.LifecycleState.TEACH, record.summary()
            )
        if record.schema is None:
            raise CliError("the automation has no sample table; run define first")
        table = record.table()
        assert table is not None

        trace_path = Path(args.trace)
        try:
            events = model.read_trace(_read_file(args.trace, "trace"))
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        snap_dir = Path(args.snapshots) if args.snapshots else trace_path.parent / "snapshots"
        _load_snapshot_dir(record, snap_dir)

        scenario_id = semantic.slugify(args.name or trace_path.stem)
        if args.decision is not None:
            last = events[-1] if events else None
            if last is None or last.kind != model.EventKind.DECIDE:
                events.append(model.ActionEvent(
                    (last.seq + 1) if last else 1,
                    model.EventKind.DECIDE,
                    last.snapshot_ref if last else "",
                    decision=args.decision,
                ))

        steps = model.normalize_events(
            events, record.snapshot_store(), record.schema, table.row(args.row),
            catalog=semantic.default_catalog(),
            oracle=semantic.OracleConfig.from_env(),
        )
        scenario = model.Scenario(
            scenario_id=scenario_id,
            name=args.name or trace_path.stem,
            steps=tuple(steps),
            sample_row_index=args.row,
        )
        program, conflict = synthesis.merge_scenario(record.program(), scenario, record.schema)
        if conflict is not None:
            record.conflicts[scenario_id] = conflict
            records.save(record)
            print(f"Conflict ({conflict.kind.value}): {conflict.message}", file=sys.stderr)
            return 2
        record.scenarios.append(scenario)
        record.conflicts.pop(scenario_id, None)
        records.save(record)

        print(f"Merged scenario '{scenario_id}' ({len(steps)} steps).")
        report = synthesis.coverage(program, record.schema)
        if report.complete():
            print("Coverage complete; every decision and state is demonstrated.")
        else:
            print("Still to demonstrate:")
            for suggestion in report.suggestions:
                print(f"  - {suggestion.text}")
        return 0


def cmd_validate(args: argparse.Namespace) -> int:
    records = store.Store(args.data_dir)
    with store.record_lock(args.automation_id):
        record = records.load(args.automation_id)
        if record.conflicts:
            for conflict in record.conflicts.values():
                print(f"Unresolved conflict ({conflict.kind.value}): {conflict.message}",
                      file=sys.stderr)
            return 2
        try:
            sim_doc = json.loads(_read_file(args.simapp, "app spec"))
        except json.JSONDecodeError as exc:
            raise CliError(f"app spec is not valid JSON: {exc}") from exc
        sim = runtime.SimApp.from_doc(sim_doc)
        table = record.table()
        if record.schema is None or table is None:
            raise CliError("the automation has no sample table; run define first")
        if record.lifecycle in (model.LifecycleState.DEFINE, model.LifecycleState.TEACH):
            record.lifecycle = model.advance_lifecycle(
                record.lifecycle, model.LifecycleState.VALIDATE, record.summary()
            )
        record.simapp_doc = sim_doc

        report = runtime.validate_program(record.program(), record.schema, table, sim)
        record.last_report = report.to_doc()
        records.save(record)

        csv_text = runtime.output_csv(report, table)
        try:
            Path(args.out).write_text(csv_text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write {args.out!r}: {exc}") from exc
        if args.report:
            Path(args.report).write_text(
                json.dumps(report.to_doc(), indent=2, ensure_ascii=False), encoding="utf-8"
            )

        for row in report.results:
            outcome = row.decision if row.decision is not None else row.extracted
            status = outcome if row.status == "ok" else f"error: {row.error}"
            print(f"  row {row.row_index}: {status}")
        print(f"Validated {report.validated_rows}/{report.total_rows} rows.")
        if report.failed_rows == 0:
            record.lifecycle = model.advance_lifecycle(
                record.lifecycle, model.LifecycleState.READY_TO_DEPLOY, record.summary()
            )
            records.save(record)
            print("Ready to deploy.")
        return 0


def cmd_map(args: argparse.Namespace) -> int:
    records = store.Store(args.data_dir)
    record = records.load(args.automation_id)
    program = record.program()
    if args.dot:
        text = synthesis.export_dot(program)
    else:
        text = json.dumps(synthesis.export_json(program), indent=2, ensure_ascii=False) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write {args.out!r}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import os

    import uvicorn

    from .service import create_app

    bind = args.bind or os.environ.get("BIND_ADDR", "127.0.0.1:8000")
    host, _, port_text = bind.partition(":")
    try:
        port = int(port_text or "8000")
    except ValueError:
        raise CliError(f"invalid --bind value {bind!r}") from None
    uvicorn.run(create_app(args.data_dir), host=host or "127.0.0.1", port=port)
    return 0


_COMMANDS = {
    "define": cmd_define,
    "teach": cmd_teach,
    "validate": cmd_validate,
    "map": cmd_map,
    "serve": cmd_serve,
}


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DemoflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
