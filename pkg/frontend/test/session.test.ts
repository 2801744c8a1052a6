import { readFileSync } from "node:fs";

import { expect, test } from "vitest";

import { ConsoleApi } from "../src/api.js";
import { learningIndicator, loadSessionView } from "../src/session.js";
import type { AutomationDetail, ProgramDoc } from "../src/types.js";

const hrProgram = JSON.parse(
  readFileSync(new URL("./fixtures/hr_program.json", import.meta.url), "utf-8"),
) as ProgramDoc;

const EMPTY_PROGRAM: ProgramDoc = { formatVersion: 1, entry: null, nodes: {} };

function detail(overrides: Partial<AutomationDetail>): AutomationDetail {
  return {
    automationId: "hr",
    name: "HR Screening",
    description: "",
    lifecycle: "Teach",
    schema: { columns: ["Candidate", "Notes"], decisionValues: ["Ready to go", "Manual review"], decisionColumn: "Decision", extractionColumn: null },
    rowCount: 6,
    scenarios: [],
    drafts: [],
    conflicts: {},
    summary: { sampleLoaded: true, outputConfigured: true, mergedScenarios: 0, outstandingConflicts: 0, validation: null },
    ...overrides,
  };
}

type Route = { status: number; body: unknown };

function routedApi(routes: Record<string, Route>): { api: ConsoleApi; hits: string[] } {
  const hits: string[] = [];
  const fetcher = async (url: string, init?: RequestInit) => {
    const key = `${init?.method ?? "GET"} ${url}`;
    hits.push(key);
    const route = routes[key];
    if (route === undefined) throw new Error(`unrouted ${key}`);
    return new Response(JSON.stringify(route.body), { status: route.status });
  };
  return { api: new ConsoleApi("", fetcher), hits };
}

// --- projection ---

test("a mid-teach reload rebuilds drafts, map and coverage from GETs", async () => {
  const steps = [
    { kind: "Click", label: "Recruitment" },
    { kind: "Type", label: "Candidate Name" },
  ];
  const { api, hits } = routedApi({
    "GET /automations/hr": { status: 200, body: detail({ drafts: ["draft-1"] }) },
    "GET /automations/hr/program": { status: 200, body: hrProgram },
    "GET /automations/hr/coverage": {
      status: 200,
      body: { complete: false, uncoveredDecisions: [], uncoveredStates: [], suggestions: [] },
    },
    "POST /automations/hr/scenarios/draft-1/events": {
      status: 200,
      body: { scenarioId: "draft-1", steps, appended: [] },
    },
  });

  const view = await loadSessionView(api, "hr");
  expect(view.indicator).toBe("I'm learning");
  expect(view.map.kind).toBe("graph");
  expect(view.banner).toBeNull();
  expect(view.coverage?.complete).toBe(false);
  expect(view.draftSteps["draft-1"]).toEqual(steps);
  expect(hits).toContain("POST /automations/hr/scenarios/draft-1/events");
});

test("the Define stage tolerates guarded coverage and shows the placeholder", async () => {
  const { api } = routedApi({
    "GET /automations/hr": { status: 200, body: detail({ lifecycle: "Define", schema: null }) },
    "GET /automations/hr/program": { status: 200, body: EMPTY_PROGRAM },
    "GET /automations/hr/coverage": {
      status: 409,
      body: { error: "GuardFailed", detail: "upload a sample table first" },
    },
  });
  const view = await loadSessionView(api, "hr");
  expect(view.coverage).toBeNull();
  expect(view.map.kind).toBe("empty");
  expect(view.draftSteps).toEqual({});
});

test("outstanding conflicts surface as the banner", async () => {
  const conflicts = {
    "step-mismatch": {
      kind: "StepMismatch",
      scenarioId: "step-mismatch",
      position: 0,
      expected: "click Recruitment",
      found: "click Admin",
      message: "at step 0: expected click Recruitment, found click Admin",
    },
  };
  const { api } = routedApi({
    "GET /automations/hr": { status: 200, body: detail({ conflicts }) },
    "GET /automations/hr/program": { status: 200, body: EMPTY_PROGRAM },
    "GET /automations/hr/coverage": {
      status: 200,
      body: { complete: false, uncoveredDecisions: [], uncoveredStates: [], suggestions: [] },
    },
  });
  const view = await loadSessionView(api, "hr");
  expect(view.banner).toContain("StepMismatch");
});

// --- indicator ---

test("the learning indicator flips only on ReadyToDeploy", () => {
  expect(learningIndicator("Define")).toBe("I'm learning");
  expect(learningIndicator("Teach")).toBe("I'm learning");
  expect(learningIndicator("Validate")).toBe("I'm learning");
  expect(learningIndicator("ReadyToDeploy")).toBe("Ready to deploy");
});
