// Helpers around the server-rendered page pane. The pane HTML arrives with
// data-node-id annotations; gestures are mapped back to those ids and fed to
// the recorder, so the console never parses HTML itself.

import type { PaneNode, PaneView } from "./types.js";

export interface NodeQuery {
  label?: string;
  tag?: string;
}

/** Find the node a user would point at, by its service-computed label. */
export function findNode(view: PaneView, query: NodeQuery): PaneNode {
  const match = view.nodes.find(
    (node) =>
      (query.label === undefined || node.label === query.label) &&
      (query.tag === undefined || node.tag === query.tag),
  );
  if (match === undefined) {
    const want = [query.tag, query.label && `"${query.label}"`].filter(Boolean).join(" ");
    throw new Error(`no node matching ${want} on page ${view.page}`);
  }
  return match;
}

export function renderPaneHtml(view: PaneView): string {
  return `<div class="pane" data-page="${view.page}" data-snapshot="${view.snapshotRef}">${view.renderedHtml}</div>`;
}

export interface GestureHandlers {
  click(nodeId: string): void;
  keystroke(nodeId: string, value: string): void;
  hover(nodeId: string): void;
}

/** Browser-only: route pane events to the recorder via data-node-id. */
export function attachCapture(root: HTMLElement, handlers: GestureHandlers): void {
  const idOf = (target: EventTarget | null): string | null => {
    if (!(target instanceof Element)) return null;
    const holder = target.closest("[data-node-id]");
    return holder === null ? null : holder.getAttribute("data-node-id");
  };
  root.addEventListener("click", (event) => {
    event.preventDefault();
    const nodeId = idOf(event.target);
    if (nodeId !== null) handlers.click(nodeId);
  });
  root.addEventListener("input", (event) => {
    const nodeId = idOf(event.target);
    const field = event.target;
    if (nodeId !== null && field instanceof HTMLInputElement) {
      handlers.keystroke(nodeId, field.value);
    }
  });
  root.addEventListener("mouseover", (event) => {
    const nodeId = idOf(event.target);
    if (nodeId !== null) handlers.hover(nodeId);
  });
}
