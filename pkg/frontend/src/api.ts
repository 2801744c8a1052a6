// REST and streaming client for the demoflow service. This is the only
// channel the console uses; there is no file or database access here.

import type {
  ActionEvent,
  AutomationDetail,
  AutomationListing,
  CoverageDoc,
  EventsResponse,
  FinishResponse,
  PaneView,
  ProgramDoc,
  ValidationStreamEvent,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
    message: string,
  ) {
    super(message);
  }
}

export interface EventBatch {
  name?: string;
  sampleRowIndex?: number;
  events: ActionEvent[];
  snapshots?: Record<string, string>;
}

/** Split NDJSON text that may arrive in arbitrary chunk boundaries.
 * Returns the parsed complete lines plus the unconsumed remainder. */
export function drainNdjson(buffer: string): { events: unknown[]; rest: string } {
  const events: unknown[] = [];
  let rest = buffer;
  for (;;) {
    const newline = rest.indexOf("\n");
    if (newline < 0) break;
    const line = rest.slice(0, newline).trim();
    rest = rest.slice(newline + 1);
    if (line.length > 0) {
      events.push(JSON.parse(line));
    }
  }
  return { events, rest };
}

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetcher: FetchLike = fetch,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetcher(`${this.baseUrl}${path}`, init);
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : response.statusText;
      throw new ServiceError(response.status, payload, detail);
    }
    return payload as T;
  }

  createAutomation(name: string, description = ""): Promise<{ automationId: string }> {
    return this.call("POST", "/automations", { name, description });
  }

  getAutomation(automationId: string): Promise<AutomationDetail> {
    return this.call("GET", `/automations/${automationId}`);
  }

  listAutomations(): Promise<{ automations: AutomationListing[] }> {
    return this.call("GET", "/automations");
  }

  uploadSample(
    automationId: string,
    csv: string,
    options: { decisionValues?: string[]; decisionColumn?: string | null; extractionColumn?: string | null } = {},
  ): Promise<{ rowCount: number }> {
    return this.call("POST", `/automations/${automationId}/sample`, {
      csv,
      decisionValues: options.decisionValues ?? [],
      decisionColumn: options.decisionColumn ?? null,
      extractionColumn: options.extractionColumn ?? null,
    });
  }

  postEvents(automationId: string, scenarioId: string, batch: EventBatch): Promise<EventsResponse> {
    return this.call("POST", `/automations/${automationId}/scenarios/${scenarioId}/events`, {
      name: batch.name ?? scenarioId,
      sampleRowIndex: batch.sampleRowIndex ?? 0,
      events: batch.events,
      snapshots: batch.snapshots ?? {},
    });
  }

  async finishScenario(
    automationId: string,
    scenarioId: string,
    decision?: string,
  ): Promise<FinishResponse> {
    const body = decision === undefined ? {} : { decision };
    try {
      return await this.call("POST", `/automations/${automationId}/scenarios/${scenarioId}/finish`, body);
    } catch (error) {
      // A blocked merge is a teaching outcome, not a transport failure.
      if (
        error instanceof ServiceError &&
        error.status === 409 &&
        typeof error.body === "object" &&
        error.body !== null &&
        "merged" in error.body
      ) {
        return error.body as FinishResponse;
      }
      throw error;
    }
  }

  deleteScenario(automationId: string, scenarioId: string): Promise<{ deleted: string }> {
    return this.call("DELETE", `/automations/${automationId}/scenarios/${scenarioId}`);
  }

  getProgram(automationId: string): Promise<ProgramDoc> {
    return this.call("GET", `/automations/${automationId}/program`);
  }

  getCoverage(automationId: string): Promise<CoverageDoc> {
    return this.call("GET", `/automations/${automationId}/coverage`);
  }

  uploadSimApp(automationId: string, spec: unknown): Promise<{ pages: string[] }> {
    return this.call("POST", `/automations/${automationId}/simapp`, spec);
  }

  simReset(automationId: string, refPrefix?: string): Promise<PaneView> {
    const body = refPrefix === undefined ? {} : { refPrefix };
    return this.call("POST", `/automations/${automationId}/sim/reset`, body);
  }

  simClick(automationId: string, nodeId: string): Promise<PaneView> {
    return this.call("POST", `/automations/${automationId}/sim/act`, { action: "click", nodeId });
  }

  simType(automationId: string, nodeId: string, value: string): Promise<PaneView> {
    return this.call("POST", `/automations/${automationId}/sim/act`, { action: "type", nodeId, value });
  }

  advanceLifecycle(automationId: string, target: string): Promise<{ lifecycle: string }> {
    return this.call("POST", `/automations/${automationId}/lifecycle`, { target });
  }

  /** Run validation, invoking onEvent for every NDJSON line as it arrives. */
  async validate(
    automationId: string,
    onEvent: (event: ValidationStreamEvent) => void,
  ): Promise<void> {
    const response = await this.fetcher(`${this.baseUrl}/automations/${automationId}/validate`, {
      method: "POST",
    });
    if (!response.ok) {
      const payload = await response.json().catch(() => null);
      throw new ServiceError(response.status, payload, `validation refused (${response.status})`);
    }
    if (!response.body) {
      throw new ServiceError(0, null, "validation stream has no body");
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffered = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffered += decoder.decode(value, { stream: true });
      const { events, rest } = drainNdjson(buffered);
      buffered = rest;
      for (const event of events) {
        onEvent(event as ValidationStreamEvent);
      }
    }
    const tail = drainNdjson(buffered + "\n");
    for (const event of tail.events) {
      onEvent(event as ValidationStreamEvent);
    }
  }
}
