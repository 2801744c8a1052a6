// Reconstructs everything on screen from service GETs. The console keeps no
// authoritative state, so a reload mid-teach rebuilds the identical view.

import { ConsoleApi, ServiceError } from "./api.js";
import { buildMapModel, conflictBanner, type MapModel } from "./map_view.js";
import type { AutomationDetail, CoverageDoc, StepDoc } from "./types.js";

export interface SessionView {
  detail: AutomationDetail;
  lifecycle: string;
  indicator: "I'm learning" | "Ready to deploy";
  coverage: CoverageDoc | null;
  map: MapModel;
  banner: string | null;
  draftSteps: Record<string, StepDoc[]>;
}

export function learningIndicator(lifecycle: string): "I'm learning" | "Ready to deploy" {
  return lifecycle === "ReadyToDeploy" ? "Ready to deploy" : "I'm learning";
}

export async function loadSessionView(api: ConsoleApi, automationId: string): Promise<SessionView> {
  const detail = await api.getAutomation(automationId);
  const program = await api.getProgram(automationId);

  let coverage: CoverageDoc | null = null;
  try {
    coverage = await api.getCoverage(automationId);
  } catch (error) {
    // Before a sample table exists there is nothing to cover yet.
    if (!(error instanceof ServiceError && error.status === 409)) throw error;
  }

  const draftSteps: Record<string, StepDoc[]> = {};
  for (const scenarioId of detail.drafts) {
    const echo = await api.postEvents(automationId, scenarioId, { events: [] });
    draftSteps[scenarioId] = echo.steps;
  }

  return {
    detail,
    lifecycle: detail.lifecycle,
    indicator: learningIndicator(detail.lifecycle),
    coverage,
    map: buildMapModel(program),
    banner: conflictBanner(detail.conflicts),
    draftSteps,
  };
}
