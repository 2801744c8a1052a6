import { readFileSync } from "node:fs";

import { expect, test } from "vitest";

import {
  buildMapModel,
  CONDITION_COLOR,
  conflictBanner,
  DECISION_COLOR,
  EXTRACT_COLOR,
  renderMapHtml,
} from "../src/map_view.js";
import type { ProgramDoc } from "../src/types.js";

const hrProgram = JSON.parse(
  readFileSync(new URL("./fixtures/hr_program.json", import.meta.url), "utf-8"),
) as ProgramDoc;
const weatherProgram = JSON.parse(
  readFileSync(new URL("./fixtures/weather_program.json", import.meta.url), "utf-8"),
) as ProgramDoc;

// --- graph model ---

test("the taught HR program maps to two diamonds and three decision leaves", () => {
  const model = buildMapModel(hrProgram);
  expect(model.kind).toBe("graph");
  if (model.kind !== "graph") return;
  const diamonds = model.nodes.filter((n) => n.shape === "diamond");
  const leaves = model.nodes.filter((n) => n.shape === "leaf");
  expect(diamonds).toHaveLength(2);
  expect(diamonds.map((n) => n.label).sort()).toEqual(["Candidates table", "Resume attachment"]);
  expect(diamonds.every((n) => n.color === CONDITION_COLOR)).toBe(true);
  expect(leaves).toHaveLength(3);
  expect(leaves.map((n) => n.label).sort()).toEqual(["Manual review", "Manual review", "Ready to go"]);
  expect(leaves.every((n) => n.color === DECISION_COLOR)).toBe(true);
  expect(model.entry).toBe(hrProgram.entry);
});

test("branch arms become labelled edges", () => {
  const model = buildMapModel(hrProgram);
  if (model.kind !== "graph") throw new Error("expected graph");
  const armLabels = model.edges.filter((e) => e.label !== null).map((e) => e.label);
  expect(armLabels.sort()).toEqual(["absent", "no records", "one record", "present"]);
  // every edge target exists
  const ids = new Set(model.nodes.map((n) => n.id));
  expect(model.edges.every((e) => ids.has(e.from) && ids.has(e.to))).toBe(true);
});

test("extraction programs get blue leaves", () => {
  const model = buildMapModel(weatherProgram);
  if (model.kind !== "graph") throw new Error("expected graph");
  const leaves = model.nodes.filter((n) => n.shape === "leaf");
  expect(leaves).toHaveLength(1);
  expect(leaves[0]?.color).toBe(EXTRACT_COLOR);
  expect(leaves[0]?.label).toBe("Temperature");
});

test("an untaught program renders as a placeholder", () => {
  const empty: ProgramDoc = { formatVersion: 1, entry: null, nodes: {} };
  expect(buildMapModel(empty).kind).toBe("empty");
  expect(buildMapModel(null).kind).toBe("empty");
});

// --- banner and html ---

test("conflict banner repeats the service message", () => {
  expect(conflictBanner({})).toBeNull();
  const banner = conflictBanner({
    "decision-contradiction": {
      kind: "DecisionContradiction",
      scenarioId: "decision-contradiction",
      position: 8,
      expected: "decision Ready to go",
      found: "decision Manual review",
      message: "at step 8: expected decision Ready to go, found decision Manual review",
    },
  });
  expect(banner).toBe(
    "Conflict (DecisionContradiction): at step 8: expected decision Ready to go, found decision Manual review",
  );
});

test("rendered html carries shapes, colors and the banner", () => {
  const html = renderMapHtml(buildMapModel(hrProgram), "Conflict (StepMismatch): details");
  expect(html).toContain('data-shape="diamond"');
  expect(html).toContain(`background:${DECISION_COLOR}`);
  expect(html).toContain('<div class="map-banner">Conflict (StepMismatch): details</div>');

  const placeholder = renderMapHtml(buildMapModel(null));
  expect(placeholder).toContain("map-empty");
});
