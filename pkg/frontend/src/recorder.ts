// Turns raw pane gestures into ActionEvents ready for posting. Keystrokes
// are buffered so one typing burst becomes one Type event; a click, an
// object selection, or a page change commits the burst first. Hovering
// produces nothing.

import type { ActionEvent, PaneView } from "./types.js";

interface PendingBurst {
  nodeId: string;
  value: string;
  snapshotRef: string;
}

export class GestureRecorder {
  private seq = 1;
  private snapshotRef: string;
  private pending: PendingBurst | null = null;

  constructor(view: PaneView | string) {
    this.snapshotRef = typeof view === "string" ? view : view.snapshotRef;
  }

  get currentSnapshot(): string {
    return this.snapshotRef;
  }

  private take(base: Omit<ActionEvent, "seq">): ActionEvent {
    return { seq: this.seq++, ...base };
  }

  private flush(): ActionEvent[] {
    if (this.pending === null) return [];
    const burst = this.pending;
    this.pending = null;
    return [
      this.take({
        kind: "Type",
        snapshotRef: burst.snapshotRef,
        targetNode: burst.nodeId,
        typedValue: burst.value,
      }),
    ];
  }

  /** Mouse-over produces no event at all. */
  hover(_nodeId: string): ActionEvent[] {
    return [];
  }

  /** Buffer a keystroke; value is the input's full text after the key. */
  keystroke(nodeId: string, value: string): ActionEvent[] {
    if (this.pending !== null && this.pending.nodeId !== nodeId) {
      const committed = this.flush();
      this.pending = { nodeId, value, snapshotRef: this.snapshotRef };
      return committed;
    }
    this.pending = { nodeId, value, snapshotRef: this.snapshotRef };
    return [];
  }

  click(nodeId: string): ActionEvent[] {
    return [
      ...this.flush(),
      this.take({ kind: "Click", snapshotRef: this.snapshotRef, targetNode: nodeId }),
    ];
  }

  selectObject(nodeId: string): ActionEvent[] {
    return [
      ...this.flush(),
      this.take({ kind: "SelectObject", snapshotRef: this.snapshotRef, targetNode: nodeId }),
    ];
  }

  assertState(objectRef: string, stateName: string): ActionEvent[] {
    return [
      ...this.flush(),
      this.take({ kind: "AssertState", snapshotRef: this.snapshotRef, objectRef, stateName }),
    ];
  }

  extract(nodeId: string): ActionEvent[] {
    return [
      ...this.flush(),
      this.take({ kind: "Extract", snapshotRef: this.snapshotRef, targetNode: nodeId }),
    ];
  }

  decide(decision: string): ActionEvent[] {
    return [...this.flush(), this.take({ kind: "Decide", snapshotRef: this.snapshotRef, decision })];
  }

  /** The pane navigated; commit any burst typed on the old page. */
  pageChanged(view: PaneView | string): ActionEvent[] {
    const committed = this.flush();
    this.snapshotRef = typeof view === "string" ? view : view.snapshotRef;
    return committed;
  }
}
