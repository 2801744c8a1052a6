// Projects the service's program JSON into a drawable graph model. Labels
// come through untouched; the console adds only shape and color.

import type { ConflictDoc, ProgramDoc, ProgramNodeDoc } from "./types.js";

export const CONDITION_COLOR = "#e7dbf7";
export const DECISION_COLOR = "#d8f0d8";
export const EXTRACT_COLOR = "#d8e8f8";

export interface MapNode {
  id: string;
  shape: "box" | "diamond" | "leaf";
  label: string;
  color: string | null;
}

export interface MapEdge {
  from: string;
  to: string;
  label: string | null;
}

export type MapModel =
  | { kind: "empty"; placeholder: string }
  | { kind: "graph"; entry: string; nodes: MapNode[]; edges: MapEdge[] };

function nodeLabel(doc: ProgramNodeDoc): string {
  if (doc.type === "branch") return doc.label ?? "";
  if (doc.type === "leaf") return doc.decision ?? "";
  return doc.step?.label ?? "";
}

export function buildMapModel(program: ProgramDoc | null): MapModel {
  if (program === null || program.entry === null || Object.keys(program.nodes).length === 0) {
    return { kind: "empty", placeholder: "Nothing taught yet. Record a first scenario to see the map." };
  }
  const nodes: MapNode[] = [];
  const edges: MapEdge[] = [];
  for (const [id, doc] of Object.entries(program.nodes)) {
    if (doc.type === "branch") {
      nodes.push({ id, shape: "diamond", label: nodeLabel(doc), color: CONDITION_COLOR });
      for (const [stateName, target] of Object.entries(doc.arms ?? {})) {
        edges.push({ from: id, to: target, label: stateName });
      }
      if (doc.elseArm) {
        edges.push({ from: id, to: doc.elseArm, label: "other" });
      }
    } else if (doc.type === "leaf") {
      nodes.push({ id, shape: "leaf", label: nodeLabel(doc), color: DECISION_COLOR });
    } else if (doc.type === "extract") {
      nodes.push({ id, shape: "leaf", label: nodeLabel(doc), color: EXTRACT_COLOR });
    } else {
      nodes.push({ id, shape: "box", label: nodeLabel(doc), color: null });
      if (doc.next) {
        edges.push({ from: id, to: doc.next, label: null });
      }
    }
  }
  return { kind: "graph", entry: program.entry, nodes, edges };
}

/** One-line banner shown above the map while merges are blocked. */
export function conflictBanner(conflicts: Record<string, ConflictDoc>): string | null {
  const docs = Object.values(conflicts);
  if (docs.length === 0) return null;
  return docs.map((c) => `Conflict (${c.kind}): ${c.message}`).join(" | ");
}

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderMapHtml(model: MapModel, banner: string | null = null): string {
  const parts: string[] = [];
  if (banner !== null) {
    parts.push(`<div class="map-banner">${escapeHtml(banner)}</div>`);
  }
  if (model.kind === "empty") {
    parts.push(`<p class="map-empty">${escapeHtml(model.placeholder)}</p>`);
    return parts.join("\n");
  }
  parts.push('<ul class="map">');
  for (const node of model.nodes) {
    const style = node.color === null ? "" : ` style="background:${node.color}"`;
    parts.push(
      `<li data-id="${node.id}" data-shape="${node.shape}"${style}>${escapeHtml(node.label)}</li>`,
    );
  }
  parts.push("</ul>");
  return parts.join("\n");
}
