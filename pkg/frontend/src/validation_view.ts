// Live validation feed. Consumes the NDJSON stream events one at a time and
// keeps just enough state to highlight the active map node and row and to
// show the final per-row table.

import type { RowResultDoc, ValidationReportDoc, ValidationStreamEvent } from "./types.js";

export class ValidationFeed {
  currentRow: number | null = null;
  currentNode: string | null = null;
  currentLabel: string | null = null;
  rows: RowResultDoc[] = [];
  report: ValidationReportDoc | null = null;
  outputCsv: string | null = null;

  consume(event: ValidationStreamEvent): void {
    if (event.kind === "progress") {
      this.currentRow = event.rowIndex;
      this.currentNode = event.nodeId;
      this.currentLabel = event.stepLabel;
    } else if (event.kind === "row") {
      const { kind, ...row } = event;
      this.rows.push(row);
    } else {
      this.report = event.report;
      this.outputCsv = event.outputCsv;
      this.currentRow = null;
      this.currentNode = null;
      this.currentLabel = null;
    }
  }

  get finished(): boolean {
    return this.report !== null;
  }

  get summaryLine(): string {
    if (this.report === null) {
      return this.currentRow === null
        ? "Waiting for validation to start."
        : `Validating row ${this.currentRow + 1}: ${this.currentLabel ?? ""}`;
    }
    const s = this.report.summary;
    return `Validated ${s.validatedRows}/${s.totalRows} rows (${s.failedRows} failed).`;
  }

  /** Rows rendered as [rowIndex, status, decision or extracted value]. */
  get tableRows(): [number, string, string][] {
    return this.rows.map((row) => [
      row.rowIndex,
      row.status,
      row.decision ?? row.extracted ?? "",
    ]);
  }
}
