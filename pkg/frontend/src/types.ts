// Shapes of the service payloads the console consumes. The console never
// re-derives any of these values; it renders what the service returns.

export type EventKind =
  | "Click"
  | "Type"
  | "Extract"
  | "SelectObject"
  | "AssertState"
  | "Decide"
  | "Ignore";

export interface ActionEvent {
  seq: number;
  kind: EventKind;
  snapshotRef: string;
  targetNode?: string;
  typedValue?: string;
  objectRef?: string;
  stateName?: string;
  decision?: string;
}

export interface SelectorCandidate {
  kind: "ById" | "ByName" | "ByLabelAnchor" | "ByPath";
  value?: string;
  label?: string;
  tag?: string;
  path?: number[];
}

export interface SelectorDoc {
  candidates: SelectorCandidate[];
  chosen: number;
}

export interface BindingDoc {
  kind: "column" | "literal";
  value: string;
}

export interface SemanticObjectDoc {
  objectId: string;
  kind: string;
  friendlyName: string;
  anchor: SelectorDoc;
  stateNames: string[];
  predicate: string;
}

export interface StepDoc {
  kind: EventKind;
  label: string;
  selector?: SelectorDoc;
  binding?: BindingDoc;
  decision?: string;
  condition?: { objectRef: string; stateName: string };
  object?: SemanticObjectDoc;
  extractionTarget?: string;
  sourceSnapshot?: string;
}

export interface EventsResponse {
  scenarioId: string;
  steps: StepDoc[];
  appended: StepDoc[];
  notice?: string;
  object?: SemanticObjectDoc;
  suggestedConditions?: string[];
}

export interface ConflictDoc {
  kind: string;
  scenarioId: string;
  position: number;
  expected: string;
  found: string;
  message: string;
  objectRef?: string;
  stateName?: string;
}

export interface CoverageSuggestion {
  kind: "decision" | "state";
  target: string;
  text: string;
  pathPrefix: string[];
  objectRef?: string;
}

export interface CoverageDoc {
  complete: boolean;
  uncoveredDecisions: string[];
  uncoveredStates: { objectRef: string; stateName: string }[];
  suggestions: CoverageSuggestion[];
}

export interface FinishResponse {
  merged: boolean;
  scenarioId?: string;
  coverage: CoverageDoc;
  program?: ProgramDoc;
  conflict?: ConflictDoc;
}

export interface ProgramNodeDoc {
  type: "step" | "branch" | "leaf" | "extract";
  label?: string;
  next?: string;
  objectRef?: string;
  arms?: Record<string, string>;
  elseArm?: string | null;
  decision?: string;
  step?: StepDoc;
  [extra: string]: unknown;
}

export interface ProgramDoc {
  formatVersion: number;
  entry: string | null;
  nodes: Record<string, ProgramNodeDoc>;
  objects?: Record<string, SemanticObjectDoc>;
  [extra: string]: unknown;
}

export interface ValidationOutcomeDoc {
  totalRows: number;
  validatedRows: number;
  failedRows: number;
}

export interface AutomationSummaryDoc {
  sampleLoaded: boolean;
  outputConfigured: boolean;
  mergedScenarios: number;
  outstandingConflicts: number;
  validation: ValidationOutcomeDoc | null;
}

export interface SchemaDoc {
  columns: string[];
  decisionValues: string[];
  decisionColumn: string | null;
  extractionColumn: string | null;
}

export interface AutomationDetail {
  automationId: string;
  name: string;
  description: string;
  lifecycle: string;
  schema: SchemaDoc | null;
  rowCount: number;
  scenarios: { scenarioId: string; name: string; sampleRowIndex: number }[];
  drafts: string[];
  conflicts: Record<string, ConflictDoc>;
  summary: AutomationSummaryDoc;
}

export interface AutomationListing {
  automationId: string;
  name: string;
  lifecycle: string;
  mergedScenarios: number;
  outstandingConflicts: number;
}

export interface PaneNode {
  nodeId: string;
  tag: string;
  label: string;
}

export interface PaneView {
  snapshotRef: string;
  page: string;
  sourceHtml: string;
  renderedHtml: string;
  nodes: PaneNode[];
}

export interface TrajectoryEntryDoc {
  nodeId: string;
  stepLabel: string;
  stateTaken?: string;
}

export interface RowResultDoc {
  rowIndex: number;
  status: "ok" | "error";
  decision: string | null;
  extracted: string | null;
  trajectory: TrajectoryEntryDoc[];
  error?: string;
}

export interface ValidationReportDoc {
  generatedAt: string;
  summary: ValidationOutcomeDoc;
  rows: RowResultDoc[];
}

export type ValidationStreamEvent =
  | { kind: "progress"; rowIndex: number; nodeId: string; stepLabel: string; status: string }
  | ({ kind: "row" } & RowResultDoc)
  | { kind: "report"; report: ValidationReportDoc; outputCsv: string };
