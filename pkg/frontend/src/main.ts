/** Browser entry point: wires the state store to the page.
 *
 * All numbers on screen come from service responses via the render
 * helpers; this module only shuttles DOM events into store calls.
 */

import { Client } from "./api.js";
import type { DocumentJson, ScenarioBody, WireParam } from "./api.js";
import { fmt } from "./format.js";
import {
  renderAssessments,
  renderDistribution,
  renderDrilldown,
  renderErrors,
  renderFit,
  renderNetwork,
  renderRanking,
  renderUndo,
} from "./render.js";
import { WorkbenchStore } from "./state.js";

const store = new WorkbenchStore(new Client(""));

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const panels = {
  errors: el<HTMLDivElement>("errors"),
  scenario: el<HTMLDivElement>("scenario"),
  distribution: el<HTMLDivElement>("distribution"),
  ranking: el<HTMLDivElement>("ranking"),
  drilldown: el<HTMLDivElement>("drilldown"),
  judgment: el<HTMLDivElement>("judgment-body"),
  assessments: el<HTMLDivElement>("assessments"),
  fit: el<HTMLDivElement>("fit-status"),
  undo: el<HTMLDivElement>("undo-stack"),
  network: el<HTMLDivElement>("network"),
  revision: el<HTMLSpanElement>("revision"),
};

// innerHTML is only replaced when the markup changed, so focus survives
// unrelated refreshes
const lastHtml = new Map<string, string>();
function setPanel(name: keyof typeof panels, html: string): void {
  if (lastHtml.get(name) === html) return;
  lastHtml.set(name, html);
  panels[name].innerHTML = html;
}

function scenarioControls(doc: DocumentJson, scenario: ScenarioBody | null): string {
  const ids = doc.network.variables.map((v) => v.id);
  const target = scenario?.target ?? ids[0] ?? "";
  const targetOpts = ids
    .map((id) => `<option value="${id}"${id === target ? " selected" : ""}>${id}</option>`)
    .join("");
  const evidence = doc.network.variables
    .map((v) => {
      const chosen = scenario?.evidence[v.id] ?? "";
      const opts = ["", ...v.states]
        .map(
          (s) =>
            `<option value="${s}"${s === chosen ? " selected" : ""}>${s || "(none)"}</option>`,
        )
        .join("");
      return (
        `<label class="ev">${v.id} <select data-ev="${v.id}"` +
        `${v.id === target ? " disabled" : ""}>${opts}</select></label>`
      );
    })
    .join(" ");
  return (
    `<label>target <select id="target-select">${targetOpts}</select></label>` +
    `<div class="evidence">${evidence}</div>`
  );
}

function judgmentControls(): string {
  const st = store.state;
  const q = st.query;
  if (!q) return `<p class="empty">pick a scenario first</p>`;
  const j = st.judgment;
  const inputs = q.states
    .map((state, i) => {
      const current = j?.assessed[state];
      const value = current !== undefined ? String(current) : String(q.probabilities[i] ?? "");
      return (
        `<label class="judged">${state} <input type="number" min="0" max="1" step="any"` +
        ` class="assessed" data-judged-state="${state}" value="${value}"></label>`
      );
    })
    .join(" ");
  const distance = j?.distance ?? null;
  const distanceHtml =
    distance === null
      ? `<span class="num" data-distance>&mdash;</span>`
      : `<span class="num" data-distance>${fmt(distance)}</span>`;
  const atOptimum = distance !== null && distance === 0;
  const modelRows = j?.distribution ? renderDistribution(j.distribution) : "";
  return (
    `<div class="judged-inputs">${inputs}` +
    ` <button id="judge-current">use current</button></div>` +
    `<p>distance to judgment: ${distanceHtml}</p>` +
    `<div class="step-controls">` +
    `<label>step size <input type="number" id="step-size" min="0" step="0.01" value="0.05"></label>` +
    ` <button id="step-once"${atOptimum || distance === null ? " disabled" : ""}>take one step</button>` +
    ` <button id="add-assessment"${distance === null ? " disabled" : ""}>save as assessment</button>` +
    `</div>${modelRows}`
  );
}

function readScenario(): ScenarioBody | null {
  const targetSel = document.getElementById("target-select") as HTMLSelectElement | null;
  if (!targetSel) return null;
  const target = targetSel.value;
  const evidence: Record<string, string> = {};
  for (const sel of panels.scenario.querySelectorAll<HTMLSelectElement>("select[data-ev]")) {
    const node = sel.dataset.ev!;
    if (node !== target && sel.value) evidence[node] = sel.value;
  }
  return { evidence, target };
}

function readJudgment(): Record<string, number> | null {
  const assessed: Record<string, number> = {};
  for (const input of panels.judgment.querySelectorAll<HTMLInputElement>("input.assessed")) {
    const v = Number(input.value);
    if (!Number.isFinite(v)) return null;
    assessed[input.dataset.judgedState!] = v;
  }
  return Object.keys(assessed).length ? assessed : null;
}

function patchJudgmentInPlace(): void {
  const d = store.state.judgment?.distance ?? null;
  const span = panels.judgment.querySelector<HTMLElement>("[data-distance]");
  if (span) span.textContent = d === null ? "—" : fmt(d);
  const step = panels.judgment.querySelector<HTMLButtonElement>("#step-once");
  if (step) step.disabled = d === null || d === 0;
  const add = panels.judgment.querySelector<HTMLButtonElement>("#add-assessment");
  if (add) add.disabled = d === null;
}

function render(): void {
  const st = store.state;
  panels.revision.textContent = st.sessionId ? `rev ${st.revision}` : "no session";
  setPanel("errors", renderErrors(st.errors));
  setPanel("undo", renderUndo(st.undoLabels));
  el<HTMLButtonElement>("undo-btn").disabled = !st.undoLabels.length;

  if (st.document) {
    setPanel("scenario", scenarioControls(st.document, st.scenario));
    const focusInNetwork = panels.network.contains(document.activeElement);
    const html = renderNetwork(st.document, store.screenedKeys(), store.frozenKeys());
    if (!focusInNetwork) setPanel("network", html);
  }
  setPanel("distribution", st.query ? renderDistribution(st.query) : `<p class="empty">&mdash;</p>`);
  setPanel("ranking", st.summary ? renderRanking(st.summary) : `<p class="empty">&mdash;</p>`);
  setPanel(
    "drilldown",
    st.report && st.selectedNode
      ? `<h3>${st.selectedNode}</h3>` + renderDrilldown(st.report, st.selectedNode)
      : `<p class="empty">select a node above</p>`,
  );
  if (panels.judgment.contains(document.activeElement)) {
    // keep the focused input alive; repaint just the live readouts
    patchJudgmentInPlace();
  } else {
    setPanel("judgment", judgmentControls());
  }
  const outliers = new Set(st.fit.outliers ?? []);
  const distances = new Map((st.fit.distances ?? []).map((d, i) => [i, d]));
  setPanel("assessments", renderAssessments(st.assessments, outliers, distances));
  setPanel("fit", renderFit(st.fit));
  el<HTMLButtonElement>("fit-start").disabled = st.fit.status === "running";
}

store.subscribe(render);

// -- event wiring -------------------------------------------------------------

el<HTMLButtonElement>("create-session").addEventListener("click", () => {
  const raw = el<HTMLTextAreaElement>("doc-input").value;
  let doc: DocumentJson;
  try {
    doc = JSON.parse(raw) as DocumentJson;
  } catch {
    panels.errors.innerHTML = renderErrors([
      { id: 0, control: "session", reason: "document is not valid JSON" },
    ]);
    return;
  }
  void store.createSession(doc);
});

panels.scenario.addEventListener("change", () => {
  const scenario = readScenario();
  if (scenario) store.setScenario(scenario);
});

panels.ranking.addEventListener("click", (ev) => {
  const row = (ev.target as HTMLElement).closest<HTMLElement>(".rank-row");
  if (row?.dataset.node) store.selectNode(row.dataset.node);
});

panels.network.addEventListener("input", (ev) => {
  const input = ev.target as HTMLInputElement;
  if (!input.classList.contains("param") || input.disabled) return;
  const value = Number(input.value);
  if (!Number.isFinite(value) || value < 0) return;
  const param = JSON.parse(input.dataset.param!) as WireParam;
  store.editParam(param, value);
});
panels.network.addEventListener("focusout", (ev) => {
  if (panels.network.contains(ev.relatedTarget as Node | null)) return;
  // apply the refresh that was held back while a field had focus
  lastHtml.delete("network");
  render();
});

panels.judgment.addEventListener("focusout", (ev) => {
  if (panels.judgment.contains(ev.relatedTarget as Node | null)) return;
  lastHtml.delete("judgment");
  render();
});

panels.judgment.addEventListener("input", (ev) => {
  if (!(ev.target as HTMLElement).classList.contains("assessed")) return;
  const assessed = readJudgment();
  if (assessed) store.judge(assessed);
});

panels.judgment.addEventListener("click", (ev) => {
  const id = (ev.target as HTMLElement).id;
  if (id === "judge-current" && store.state.query) {
    const q = store.state.query;
    const assessed: Record<string, number> = {};
    q.states.forEach((s, i) => (assessed[s] = q.probabilities[i]!));
    store.judge(assessed);
  } else if (id === "step-once") {
    const size = Number((document.getElementById("step-size") as HTMLInputElement).value);
    if (Number.isFinite(size) && size > 0) void store.step(size);
  } else if (id === "add-assessment") {
    void store.addAssessment();
  }
});

panels.assessments.addEventListener("click", (ev) => {
  const btn = ev.target as HTMLElement;
  if (btn.dataset.del !== undefined) void store.removeAssessment(Number(btn.dataset.del));
});

el<HTMLButtonElement>("undo-btn").addEventListener("click", () => void store.undo());

el<HTMLButtonElement>("fit-start").addEventListener("click", () => {
  const rule = (document.getElementById("fit-rule") as HTMLSelectElement).value as
    | "logarithmic"
    | "quadratic";
  const stepSize = Number((document.getElementById("fit-step") as HTMLInputElement).value);
  const epochs = Number((document.getElementById("fit-epochs") as HTMLInputElement).value);
  void store.startFit({
    rule,
    step_size: Number.isFinite(stepSize) ? stepSize : undefined,
    max_epochs: Number.isFinite(epochs) ? epochs : undefined,
  });
});

panels.errors.addEventListener("click", (ev) => {
  const btn = ev.target as HTMLElement;
  if (btn.dataset.dismiss !== undefined) store.dismissError(Number(btn.dataset.dismiss));
});

render();
