// Browser entry point. Everything below is wiring: state lives on the
// server, and each handler round-trips through the API and re-renders.

import { ConsoleApi } from "./api.js";
import { buildChips, type ConditionChip } from "./condition_chips.js";
import { attachCapture, renderPaneHtml } from "./dom_render.js";
import { renderMapHtml } from "./map_view.js";
import { GestureRecorder } from "./recorder.js";
import { loadSessionView, type SessionView } from "./session.js";
import type { ActionEvent, PaneView, StepDoc } from "./types.js";
import { ValidationFeed } from "./validation_view.js";

const api = new ConsoleApi("");

interface TeachState {
  automationId: string;
  scenarioId: string;
  recorder: GestureRecorder;
  view: PaneView;
  steps: StepDoc[];
  chips: ConditionChip[];
  selectedObjectRef: string | null;
}

let teach: TeachState | null = null;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing #${id}`);
  return found as T;
}

function renderSteps(steps: StepDoc[]): void {
  el("steps").innerHTML = steps
    .map((s) => `<li class="step step-${s.kind.toLowerCase()}">${s.label}</li>`)
    .join("");
}

function renderChips(chips: ConditionChip[]): void {
  el("chips").innerHTML = chips
    .map((c, i) => `<button class="chip" data-chip="${i}">${c.label}</button>`)
    .join("");
  for (const button of el("chips").querySelectorAll("button[data-chip]")) {
    button.addEventListener("click", () => {
      const index = Number(button.getAttribute("data-chip"));
      void pickChip(index);
    });
  }
}

async function refreshSession(automationId: string): Promise<SessionView> {
  const session = await loadSessionView(api, automationId);
  el("indicator").textContent = session.indicator;
  el("map").innerHTML = renderMapHtml(session.map, session.banner);
  const suggestions = session.coverage?.suggestions ?? [];
  el("suggestions").innerHTML = suggestions.map((s) => `<li>${s.text}</li>`).join("");
  return session;
}

async function post(events: ActionEvent[]): Promise<void> {
  if (teach === null || events.length === 0) return;
  const echo = await api.postEvents(teach.automationId, teach.scenarioId, { events });
  teach.steps = echo.steps;
  renderSteps(echo.steps);
  if (echo.object !== undefined && echo.suggestedConditions !== undefined) {
    teach.selectedObjectRef = echo.object.objectId;
    teach.chips = buildChips(echo.object, echo.suggestedConditions);
    renderChips(teach.chips);
  }
  if (echo.notice !== undefined) {
    el("notice").textContent = echo.notice;
  }
}

async function pickChip(index: number): Promise<void> {
  if (teach === null) return;
  const chip = teach.chips.at(index);
  if (chip === undefined) return;
  await post(teach.recorder.assertState(chip.objectRef, chip.stateName));
  teach.chips = [];
  renderChips([]);
}

async function refreshPane(view: PaneView): Promise<void> {
  if (teach === null) return;
  await post(teach.recorder.pageChanged(view));
  teach.view = view;
  el("pane").innerHTML = renderPaneHtml(view);
}

async function startTeaching(automationId: string, scenarioId: string, rowIndex: number): Promise<void> {
  const view = await api.simReset(automationId, `${scenarioId}-`);
  teach = {
    automationId,
    scenarioId,
    recorder: new GestureRecorder(view),
    view,
    steps: [],
    chips: [],
    selectedObjectRef: null,
  };
  await api.postEvents(automationId, scenarioId, { sampleRowIndex: rowIndex, events: [] });
  el("pane").innerHTML = renderPaneHtml(view);
  attachCapture(el("pane"), {
    click: (nodeId) => {
      void (async () => {
        if (teach === null) return;
        await post(teach.recorder.click(nodeId));
        await refreshPane(await api.simClick(teach.automationId, nodeId));
      })();
    },
    keystroke: (nodeId, value) => {
      void (async () => {
        if (teach === null) return;
        await post(teach.recorder.keystroke(nodeId, value));
        await api.simType(teach.automationId, nodeId, value);
      })();
    },
    hover: (nodeId) => {
      teach?.recorder.hover(nodeId);
    },
  });
}

async function finishScenario(decision?: string): Promise<void> {
  if (teach === null) return;
  const result = await api.finishScenario(teach.automationId, teach.scenarioId, decision);
  el("notice").textContent = result.merged
    ? `Merged scenario '${result.scenarioId}'.`
    : `Conflict (${result.conflict?.kind}): ${result.conflict?.message}`;
  await refreshSession(teach.automationId);
  teach = null;
}

async function runValidation(automationId: string): Promise<void> {
  const feed = new ValidationFeed();
  await api.validate(automationId, (event) => {
    feed.consume(event);
    el("validation").textContent = feed.summaryLine;
    el("rows").innerHTML = feed.tableRows
      .map(([row, status, value]) => `<tr class="${status}"><td>${row + 1}</td><td>${value}</td></tr>`)
      .join("");
  });
  await refreshSession(automationId);
}

function boot(): void {
  const automationId = window.location.hash.slice(1);
  if (automationId.length > 0) {
    void refreshSession(automationId);
  }
  el("teach-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const id = window.location.hash.slice(1);
    const scenario = el<HTMLInputElement>("scenario-id").value;
    const row = Number(el<HTMLInputElement>("row-index").value);
    void startTeaching(id, scenario, row);
  });
  el("finish").addEventListener("click", () => void finishScenario());
  el("validate").addEventListener("click", () => {
    void runValidation(window.location.hash.slice(1));
  });
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
