/** Typed client for the bnsense HTTP service.
 *
 * The workbench talks to the service exclusively through this module;
 * nothing here computes probabilities, it only moves JSON.
 */

export type TableParam = { node: string; state: string; given: string[] };
export type NoisyOrParam =
  | { node: string; term: "base" }
  | { node: string; term: "inhibitor"; parent: string };
export type WireParam = TableParam | NoisyOrParam;

export interface TableCpt {
  kind: "table";
  rows: { given: string[]; probs: Record<string, number> }[];
}
export interface NoisyOrCpt {
  kind: "noisy-or";
  base: number;
  inhibitors: Record<string, number>;
}

export interface VariableJson {
  id: string;
  label?: string;
  states: string[];
  parents: string[];
  cpt: TableCpt | NoisyOrCpt;
}

export interface DocumentJson {
  version: number;
  network: { variables: VariableJson[] };
  scenarios?: unknown[];
  assessments?: unknown[];
}

export interface ScenarioBody {
  evidence: Record<string, string>;
  target: string;
}

export interface QueryResponse {
  target: string;
  states: string[];
  probabilities: number[];
}

export interface SummaryEntry {
  value: number;
  param: WireParam;
  state: string;
}
export type SummaryResponse = Record<string, SummaryEntry>;

export interface SensitivityEntry {
  param: WireParam;
  state: string;
  value: number;
}

export interface SensitivitiesResponse {
  scenario: ScenarioBody;
  target_states: string[];
  target_marginal: number[];
  entries: SensitivityEntry[];
  structural_zero: WireParam[];
  frozen: WireParam[];
  node_max: Record<string, number>;
}

export interface NetworkResponse {
  revision: number;
  document: DocumentJson;
}

export interface AssessmentBody {
  scenario: ScenarioBody;
  assessed: Record<string, number>;
  weight?: number;
  kind?: "holistic" | "local";
}

export interface AssessmentsResponse {
  revision: number;
  assessments: AssessmentBody[];
}

export interface MutationResponse {
  revision: number;
  count?: number;
  index?: number;
}

export interface FitRequestBody {
  rule?: "logarithmic" | "quadratic";
  step_size?: number;
  max_epochs?: number;
  convergence_tol?: number;
  restarts?: number;
  scenario_order?: "fixed-cycle" | "shuffled";
  parameter_floor?: number;
  seed?: number;
  wait?: boolean;
}

export interface FitResultJson {
  network: DocumentJson["network"];
  objective_trace: number[];
  distances: number[];
  outliers: number[];
  restart_index: number;
}

export interface FitStatusResponse {
  job_id: string;
  status: "running" | "done" | "failed";
  result?: FitResultJson;
  applied?: boolean;
  revision?: number;
  error?: string;
}

export interface GradientStepResponse {
  revision: number;
  distribution: QueryResponse;
  distance: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: { reason?: string; kind?: string; issues?: string[] } & Record<string, unknown>,
  ) {
    super(body.reason ?? `request failed with status ${status}`);
  }
}

/** The service surface the state store depends on; `Client` implements it
 * over fetch and the tests implement it over recorded fixtures. */
export interface Api {
  createSession(doc: DocumentJson): Promise<{ session_id: string; revision: number }>;
  getNetwork(sid: string): Promise<NetworkResponse>;
  patchParams(sid: string, updates: { param: WireParam; value: number }[]): Promise<MutationResponse>;
  undo(sid: string): Promise<MutationResponse>;
  query(sid: string, scenario: ScenarioBody): Promise<QueryResponse>;
  summary(sid: string, scenario: ScenarioBody): Promise<SummaryResponse>;
  sensitivities(sid: string, scenario: ScenarioBody): Promise<SensitivitiesResponse>;
  listAssessments(sid: string): Promise<AssessmentsResponse>;
  addAssessment(sid: string, a: AssessmentBody): Promise<MutationResponse>;
  deleteAssessment(sid: string, index: number): Promise<MutationResponse>;
  startFit(sid: string, body: FitRequestBody): Promise<{ job_id: string; status: string }>;
  fitStatus(sid: string, jobId: string): Promise<FitStatusResponse>;
  gradientStep(
    sid: string,
    body: { assessment: AssessmentBody; step_size: number; rule?: string },
  ): Promise<GradientStepResponse>;
}

export class Client implements Api {
  constructor(
    private base: string = "",
    private fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async req<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    const parsed: unknown = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      throw new ApiError(resp.status, (parsed ?? {}) as ApiError["body"]);
    }
    return parsed as T;
  }

  createSession(doc: DocumentJson) {
    return this.req<{ session_id: string; revision: number }>("POST", "/sessions", doc);
  }
  getNetwork(sid: string) {
    return this.req<NetworkResponse>("GET", `/sessions/${sid}/network`);
  }
  patchParams(sid: string, updates: { param: WireParam; value: number }[]) {
    return this.req<MutationResponse>("PATCH", `/sessions/${sid}/params`, { updates });
  }
  undo(sid: string) {
    return this.req<MutationResponse>("POST", `/sessions/${sid}/undo`);
  }
  query(sid: string, scenario: ScenarioBody) {
    return this.req<QueryResponse>("POST", `/sessions/${sid}/query`, scenario);
  }
  summary(sid: string, scenario: ScenarioBody) {
    return this.req<SummaryResponse>("POST", `/sessions/${sid}/sensitivities`, {
      ...scenario,
      summary: true,
    });
  }
  sensitivities(sid: string, scenario: ScenarioBody) {
    return this.req<SensitivitiesResponse>("POST", `/sessions/${sid}/sensitivities`, scenario);
  }
  listAssessments(sid: string) {
    return this.req<AssessmentsResponse>("GET", `/sessions/${sid}/assessments`);
  }
  addAssessment(sid: string, a: AssessmentBody) {
    return this.req<MutationResponse>("POST", `/sessions/${sid}/assessments`, a);
  }
  deleteAssessment(sid: string, index: number) {
    return this.req<MutationResponse>("DELETE", `/sessions/${sid}/assessments/${index}`);
  }
  startFit(sid: string, body: FitRequestBody) {
    return this.req<{ job_id: string; status: string }>("POST", `/sessions/${sid}/fit`, body);
  }
  fitStatus(sid: string, jobId: string) {
    return this.req<FitStatusResponse>("GET", `/sessions/${sid}/fit/${jobId}`);
  }
  gradientStep(sid: string, body: { assessment: AssessmentBody; step_size: number; rule?: string }) {
    return this.req<GradientStepResponse>("POST", `/sessions/${sid}/gradient-step`, body);
  }
}
