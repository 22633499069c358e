/** Workbench state machine.
 *
 * Invariants enforced here rather than in the views:
 * - at most one mutation is in flight; later mutations queue behind it
 * - parameter edits within the debounce window coalesce into one PATCH
 * - every read is tagged with the mutation epoch at issue time and its
 *   response is discarded if any mutation applied meanwhile
 * - the undo mirror lists exactly the user-visible mutations, in order
 * - judging a target distribution probes the current distance with a
 *   zero-size gradient step immediately undone, leaving the session's
 *   content untouched
 */

import type {
  Api,
  AssessmentBody,
  DocumentJson,
  FitRequestBody,
  QueryResponse,
  ScenarioBody,
  SensitivitiesResponse,
  SummaryResponse,
  WireParam,
} from "./api.js";
import { ApiError } from "./api.js";
import { paramKey } from "./render.js";
import type { UiError } from "./render.js";

export interface FitPanel {
  status: "idle" | "running" | "done" | "failed" | "stale";
  trace?: number[];
  outliers?: number[];
  distances?: number[];
  error?: string;
}

export interface JudgmentPanel {
  assessed: Record<string, number>;
  distance: number | null;
  distribution: QueryResponse | null;
}

export interface WorkbenchState {
  sessionId: string | null;
  revision: number;
  document: DocumentJson | null;
  scenario: ScenarioBody | null;
  query: QueryResponse | null;
  summary: SummaryResponse | null;
  report: SensitivitiesResponse | null;
  selectedNode: string | null;
  assessments: AssessmentBody[];
  judgment: JudgmentPanel | null;
  fit: FitPanel;
  undoLabels: string[];
  errors: UiError[];
}

export interface StoreOptions {
  debounceMs?: number;
  pollMs?: number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class WorkbenchStore {
  readonly state: WorkbenchState = {
    sessionId: null,
    revision: 0,
    document: null,
    scenario: null,
    query: null,
    summary: null,
    report: null,
    selectedNode: null,
    assessments: [],
    judgment: null,
    fit: { status: "idle" },
    undoLabels: [],
    errors: [],
  };

  private listeners: (() => void)[] = [];
  private mutationQueue: Promise<void> = Promise.resolve();
  private epoch = 0;
  private nextErrorId = 1;

  private pendingEdits = new Map<string, { param: WireParam; value: number }>();
  private editTimerArmed = false;
  private pendingJudgment: Record<string, number> | null = null;
  private judgeTimerArmed = false;

  private readonly debounceMs: number;
  private readonly pollMs: number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;

  constructor(
    private api: Api,
    opts: StoreOptions = {},
  ) {
    this.debounceMs = opts.debounceMs ?? 150;
    this.pollMs = opts.pollMs ?? 250;
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  private fail(control: string, e: unknown): void {
    const reason =
      e instanceof ApiError
        ? (e.body.issues?.join("; ") ?? e.body.reason ?? e.message)
        : e instanceof Error
          ? e.message
          : String(e);
    this.state.errors.push({ id: this.nextErrorId++, control, reason });
    this.notify();
  }

  dismissError(id: number): void {
    this.state.errors = this.state.errors.filter((e) => e.id !== id);
    this.notify();
  }

  /** Serialize mutations: each waits for every earlier one to settle. */
  private enqueue(run: () => Promise<void>): Promise<void> {
    const chained = this.mutationQueue.then(run);
    this.mutationQueue = chained.catch(() => undefined);
    return chained.catch(() => undefined);
  }

  // -- session ---------------------------------------------------------------

  async createSession(doc: DocumentJson): Promise<void> {
    await this.enqueue(async () => {
      try {
        const created = await this.api.createSession(doc);
        this.state.sessionId = created.session_id;
        this.state.revision = created.revision;
        this.state.undoLabels = [];
        this.state.assessments = [];
        this.state.fit = { status: "idle" };
        this.state.judgment = null;
        this.epoch++;
        this.notify();
      } catch (e) {
        this.fail("session", e);
        return;
      }
      await this.refresh();
    });
  }

  setScenario(scenario: ScenarioBody): Promise<void> {
    this.state.scenario = scenario;
    this.state.judgment = null;
    this.notify();
    return this.refresh();
  }

  /** Resolves once every mutation queued so far has settled. */
  idle(): Promise<void> {
    return this.mutationQueue;
  }

  selectNode(node: string | null): void {
    this.state.selectedNode = node;
    this.notify();
  }

  // -- reads, epoch-guarded -----------------------------------------------------

  /** Reload every panel for the current revision; stale responses (raced
   * by a newer mutation) are discarded wholesale. */
  async refresh(): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    const at = this.epoch;
    const scenario = this.state.scenario;
    try {
      const network = await this.api.getNetwork(sid);
      const assessments = await this.api.listAssessments(sid);
      let query: QueryResponse | null = null;
      let summary: SummaryResponse | null = null;
      let report: SensitivitiesResponse | null = null;
      if (scenario) {
        query = await this.api.query(sid, scenario);
        summary = await this.api.summary(sid, scenario);
        report = await this.api.sensitivities(sid, scenario);
      }
      if (at !== this.epoch) return; // superseded; drop silently
      this.state.document = network.document;
      this.state.revision = network.revision;
      this.state.assessments = assessments.assessments;
      this.state.query = query;
      this.state.summary = summary;
      this.state.report = report;
      this.notify();
    } catch (e) {
      if (at !== this.epoch) return;
      this.fail(scenario ? "scenario" : "session", e);
    }
  }

  /** Keys of parameters that cannot move the current target, plus frozen
   * ones, straight from the active report. */
  screenedKeys(): Set<string> {
    return new Set((this.state.report?.structural_zero ?? []).map(paramKey));
  }

  frozenKeys(): Set<string> {
    return new Set((this.state.report?.frozen ?? []).map(paramKey));
  }

  // -- parameter edits -----------------------------------------------------------

  /** Record an edit; edits arriving within the debounce window are sent
   * as a single PATCH followed by one refresh. */
  editParam(param: WireParam, value: number): void {
    this.pendingEdits.set(paramKey(param), { param, value });
    if (this.editTimerArmed) return;
    this.editTimerArmed = true;
    this.setTimer(() => {
      this.editTimerArmed = false;
      void this.flushEdits();
    }, this.debounceMs);
  }

  private flushEdits(): Promise<void> {
    const updates = [...this.pendingEdits.values()];
    this.pendingEdits.clear();
    if (!updates.length) return Promise.resolve();
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      if (!sid) return;
      try {
        const resp = await this.api.patchParams(sid, updates);
        this.state.revision = resp.revision;
        this.state.undoLabels.push(
          updates.length === 1
            ? `edit ${paramKey(updates[0]!.param)}`
            : `edit ${updates.length} parameters`,
        );
        this.epoch++;
        this.notify();
      } catch (e) {
        this.fail(`param:${paramKey(updates[0]!.param)}`, e);
        return;
      }
      await this.refresh();
    });
  }

  undo(): Promise<void> {
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      if (!sid) return;
      try {
        const resp = await this.api.undo(sid);
        this.state.revision = resp.revision;
        this.state.undoLabels.pop();
        this.epoch++;
        this.notify();
      } catch (e) {
        this.fail("undo", e);
        return;
      }
      await this.refresh();
    });
  }

  // -- holistic judgment ----------------------------------------------------------

  /** Update the entered target distribution; after the debounce window,
   * probe its distance with a zero-size step that is undone immediately,
   * so the session content never changes. */
  judge(assessed: Record<string, number>): void {
    this.pendingJudgment = assessed;
    this.state.judgment = {
      assessed,
      distance: this.state.judgment?.distance ?? null,
      distribution: this.state.judgment?.distribution ?? null,
    };
    this.notify();
    if (this.judgeTimerArmed) return;
    this.judgeTimerArmed = true;
    this.setTimer(() => {
      this.judgeTimerArmed = false;
      void this.flushJudgment();
    }, this.debounceMs);
  }

  private flushJudgment(): Promise<void> {
    const assessed = this.pendingJudgment;
    this.pendingJudgment = null;
    if (!assessed) return Promise.resolve();
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      const scenario = this.state.scenario;
      if (!sid || !scenario) return;
      try {
        const probe = await this.api.gradientStep(sid, {
          assessment: { scenario, assessed },
          step_size: 0,
        });
        const undone = await this.api.undo(sid);
        this.state.revision = undone.revision;
        this.state.judgment = {
          assessed,
          distance: probe.distance,
          distribution: probe.distribution,
        };
        this.notify();
      } catch (e) {
        this.fail("judgment", e);
      }
    });
  }

  /** One real descent step toward the entered judgment. */
  step(stepSize: number): Promise<void> {
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      const scenario = this.state.scenario;
      const assessed = this.state.judgment?.assessed;
      if (!sid || !scenario || !assessed) return;
      try {
        const resp = await this.api.gradientStep(sid, {
          assessment: { scenario, assessed },
          step_size: stepSize,
        });
        this.state.revision = resp.revision;
        this.state.undoLabels.push(`step toward ${scenario.target} judgment`);
        this.state.judgment = { assessed, distance: resp.distance, distribution: resp.distribution };
        this.epoch++;
        this.notify();
      } catch (e) {
        this.fail("judgment", e);
        return;
      }
      await this.refresh();
    });
  }

  addAssessment(weight = 1.0): Promise<void> {
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      const scenario = this.state.scenario;
      const assessed = this.state.judgment?.assessed;
      if (!sid || !scenario || !assessed) return;
      try {
        const resp = await this.api.addAssessment(sid, { scenario, assessed, weight });
        this.state.revision = resp.revision;
        this.state.undoLabels.push(`assess ${scenario.target}`);
        this.epoch++;
        this.notify();
      } catch (e) {
        this.fail("judgment", e);
        return;
      }
      await this.refresh();
    });
  }

  removeAssessment(index: number): Promise<void> {
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      if (!sid) return;
      try {
        const resp = await this.api.deleteAssessment(sid, index);
        this.state.revision = resp.revision;
        this.state.undoLabels.push(`remove assessment ${index}`);
        this.epoch++;
        this.notify();
      } catch (e) {
        this.fail(`assessment:${index}`, e);
        return;
      }
      await this.refresh();
    });
  }

  // -- fitting -----------------------------------------------------------------

  private sleep(ms: number): Promise<void> {
    return new Promise((resolve) => this.setTimer(resolve, ms));
  }

  startFit(config: FitRequestBody): Promise<void> {
    return this.enqueue(async () => {
      const sid = this.state.sessionId;
      if (!sid) return;
      let jobId: string;
      try {
        const accepted = await this.api.startFit(sid, { ...config, wait: false });
        jobId = accepted.job_id;
        this.state.fit = { status: "running" };
        this.notify();
      } catch (e) {
        this.state.fit = { status: "idle" };
        this.fail("fit", e);
        return;
      }
      for (;;) {
        let status;
        try {
          status = await this.api.fitStatus(sid, jobId);
        } catch (e) {
          this.state.fit = { status: "failed", error: "lost track of the fit job" };
          this.fail("fit", e);
          return;
        }
        if (status.status === "running") {
          await this.sleep(this.pollMs);
          continue;
        }
        if (status.status === "failed") {
          this.state.fit = { status: "failed", error: status.error };
          this.notify();
          return;
        }
        if (!status.applied) {
          this.state.fit = { status: "stale" };
          this.notify();
          return;
        }
        this.state.revision = status.revision ?? this.state.revision;
        this.state.fit = {
          status: "done",
          trace: status.result?.objective_trace ?? [],
          outliers: status.result?.outliers ?? [],
          distances: status.result?.distances ?? [],
        };
        this.state.undoLabels.push("fit to assessments");
        this.epoch++;
        this.notify();
        break;
      }
      await this.refresh();
    });
  }
}
