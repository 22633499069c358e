/** Pure view builders: service JSON in, HTML strings out.
 *
 * No DOM access and no arithmetic on probabilities beyond layout (bar
 * widths). The row extractors are exported separately so contract tests
 * can compare rendered text against raw responses without parsing HTML.
 */

import type {
  AssessmentBody,
  DocumentJson,
  QueryResponse,
  SensitivitiesResponse,
  SummaryResponse,
  VariableJson,
  WireParam,
} from "./api.js";
import { barPercent, fmt } from "./format.js";

export function escapeHtml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Canonical string identity of a parameter, used as a lookup key. */
export function paramKey(p: WireParam): string {
  if ("term" in p) {
    return p.term === "base" ? `${p.node}|base` : `${p.node}|~${p.parent}`;
  }
  return `${p.node}|${p.state}|${p.given.join(",")}`;
}

/** Human label matching the engine's own parameter descriptions. */
export function paramLabel(p: WireParam): string {
  if ("term" in p) {
    return p.term === "base" ? `${p.node}[base]` : `${p.node}[~${p.parent}]`;
  }
  const given = p.given.length ? p.given.join(", ") : "-";
  return `${p.node}[${p.state} | ${given}]`;
}

// -- target distribution -------------------------------------------------

export interface DistributionRow {
  state: string;
  text: string;
}

export function distributionRows(q: QueryResponse): DistributionRow[] {
  return q.states.map((state, i) => ({ state, text: fmt(q.probabilities[i]!) }));
}

export function renderDistribution(q: QueryResponse): string {
  const rows = distributionRows(q)
    .map(
      (r) =>
        `<tr><td>${escapeHtml(r.state)}</td>` +
        `<td class="num" data-state="${escapeHtml(r.state)}">${r.text}</td></tr>`,
    )
    .join("");
  return (
    `<table class="distribution" data-target="${escapeHtml(q.target)}">` +
    `<thead><tr><th>state</th><th>P(state | evidence)</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

// -- sensitivity ranking ----------------------------------------------------

export interface RankingRow {
  node: string;
  value: number;
  text: string;
  label: string;
  state: string;
}

/** Nodes ordered by descending per-node maximum |derivative|, ties by id. */
export function rankingRows(summary: SummaryResponse): RankingRow[] {
  return Object.entries(summary)
    .map(([node, e]) => ({
      node,
      value: e.value,
      text: fmt(e.value),
      label: paramLabel(e.param),
      state: e.state,
    }))
    .sort((a, b) => b.value - a.value || (a.node < b.node ? -1 : a.node > b.node ? 1 : 0));
}

export function renderRanking(summary: SummaryResponse): string {
  const rows = rankingRows(summary);
  const max = rows.length ? rows[0]!.value : 0;
  const body = rows
    .map((r) => {
      const zero = r.value === 0 ? " zero" : "";
      return (
        `<tr class="rank-row${zero}" data-node="${escapeHtml(r.node)}">` +
        `<td>${escapeHtml(r.node)}</td>` +
        `<td class="bar-cell"><div class="bar" style="width:${barPercent(r.value, max)}%"></div></td>` +
        `<td class="num" data-node-max="${escapeHtml(r.node)}">${r.text}</td>` +
        `<td class="witness">${escapeHtml(r.label)} &rarr; ${escapeHtml(r.state)}</td></tr>`
      );
    })
    .join("");
  return (
    `<table class="ranking"><thead><tr>` +
    `<th>node</th><th></th><th>max |dP/d&theta;|</th><th>at parameter</th>` +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

// -- per-parameter drill-down ----------------------------------------------

export interface DrilldownRow {
  key: string;
  label: string;
  state: string;
  text: string;
}

export function drilldownRows(report: SensitivitiesResponse, node: string): DrilldownRow[] {
  return report.entries
    .filter((e) => e.param.node === node)
    .map((e) => ({
      key: paramKey(e.param),
      label: paramLabel(e.param),
      state: e.state,
      text: fmt(e.value),
    }));
}

export function renderDrilldown(report: SensitivitiesResponse, node: string): string {
  const rows = drilldownRows(report, node)
    .map(
      (r) =>
        `<tr><td>${escapeHtml(r.label)}</td><td>${escapeHtml(r.state)}</td>` +
        `<td class="num" data-entry="${escapeHtml(r.key)}|${escapeHtml(r.state)}">${r.text}</td></tr>`,
    )
    .join("");
  if (!rows) return `<p class="empty">no differentiable parameters on ${escapeHtml(node)}</p>`;
  return (
    `<table class="drilldown"><thead><tr>` +
    `<th>parameter</th><th>target state</th><th>dP/d&theta;</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

// -- network view / CPT editors ----------------------------------------------

function tableEditor(
  v: VariableJson,
  screened: ReadonlySet<string>,
  frozen: ReadonlySet<string>,
): string {
  if (v.cpt.kind !== "table") return "";
  const rows = v.cpt.rows
    .map((row) => {
      const given = row.given.length ? row.given.join(", ") : "-";
      const cells = v.states
        .map((state) => {
          const param: WireParam = { node: v.id, state, given: row.given };
          const key = paramKey(param);
          const isFrozen = frozen.has(key);
          const classes = ["param"];
          if (isFrozen) classes.push("frozen");
          if (screened.has(key)) classes.push("inert");
          const value = row.probs[state] ?? 0;
          return (
            `<td><input type="number" min="0" step="0.01" class="${classes.join(" ")}"` +
            ` data-param="${escapeHtml(JSON.stringify(param))}"` +
            ` value="${value}"${isFrozen ? " disabled" : ""}></td>`
          );
        })
        .join("");
      return `<tr><td class="given">${escapeHtml(given)}</td>${cells}</tr>`;
    })
    .join("");
  const heads = v.states.map((s) => `<th>${escapeHtml(s)}</th>`).join("");
  return (
    `<table class="cpt"><thead><tr><th>given</th>${heads}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

function noisyOrEditor(
  v: VariableJson,
  screened: ReadonlySet<string>,
  frozen: ReadonlySet<string>,
): string {
  if (v.cpt.kind !== "noisy-or") return "";
  const terms: { param: WireParam; label: string; value: number }[] = [
    { param: { node: v.id, term: "base" }, label: "base", value: v.cpt.base },
    ...v.parents.map((parent) => ({
      param: { node: v.id, term: "inhibitor", parent } as WireParam,
      label: `~${parent}`,
      value: v.cpt.kind === "noisy-or" ? v.cpt.inhibitors[parent] ?? 0 : 0,
    })),
  ];
  const rows = terms
    .map(({ param, label, value }) => {
      const key = paramKey(param);
      const isFrozen = frozen.has(key);
      const classes = ["param"];
      if (isFrozen) classes.push("frozen");
      if (screened.has(key)) classes.push("inert");
      return (
        `<tr><td>${escapeHtml(label)}</td>` +
        `<td><input type="number" min="0" max="1" step="0.01" class="${classes.join(" ")}"` +
        ` data-param="${escapeHtml(JSON.stringify(param))}"` +
        ` value="${value}"${isFrozen ? " disabled" : ""}></td></tr>`
      );
    })
    .join("");
  return `<table class="cpt noisy-or"><tbody>${rows}</tbody></table>`;
}

/** Layer index per node: roots at 0, children below their deepest parent. */
export function layerOf(doc: DocumentJson): Record<string, number> {
  const depth: Record<string, number> = {};
  const byId = new Map(doc.network.variables.map((v) => [v.id, v]));
  const visit = (id: string): number => {
    const known = depth[id];
    if (known !== undefined) return known;
    const v = byId.get(id);
    const d = !v || v.parents.length === 0 ? 0 : 1 + Math.max(...v.parents.map(visit));
    depth[id] = d;
    return d;
  };
  for (const v of doc.network.variables) visit(v.id);
  return depth;
}

export function renderNetwork(
  doc: DocumentJson,
  screened: ReadonlySet<string>,
  frozen: ReadonlySet<string>,
): string {
  const layers = layerOf(doc);
  const maxLayer = Math.max(0, ...Object.values(layers));
  const columns: string[] = [];
  for (let layer = 0; layer <= maxLayer; layer++) {
    const cards = doc.network.variables
      .filter((v) => layers[v.id] === layer)
      .map((v) => {
        const editor =
          v.cpt.kind === "table"
            ? tableEditor(v, screened, frozen)
            : noisyOrEditor(v, screened, frozen);
        const parents = v.parents.length
          ? `<div class="parents">&uarr; ${escapeHtml(v.parents.join(", "))}</div>`
          : "";
        const label = v.label ? ` <span class="label">${escapeHtml(v.label)}</span>` : "";
        return (
          `<section class="node-card" data-node="${escapeHtml(v.id)}">` +
          `<h3>${escapeHtml(v.id)}${label}</h3>${parents}${editor}</section>`
        );
      })
      .join("");
    columns.push(`<div class="layer">${cards}</div>`);
  }
  return `<div class="network">${columns.join("")}</div>`;
}

// -- assessments ------------------------------------------------------------

export function renderAssessments(
  assessments: AssessmentBody[],
  outliers: ReadonlySet<number> = new Set(),
  distances: ReadonlyMap<number, number> = new Map(),
): string {
  if (!assessments.length) return `<p class="empty">no assessments yet</p>`;
  const rows = assessments
    .map((a, i) => {
      const ev = Object.entries(a.scenario.evidence)
        .map(([k, s]) => `${k}=${s}`)
        .join(", ");
      const judged = Object.entries(a.assessed)
        .map(([s, p]) => `${s}: ${fmt(p)}`)
        .join(", ");
      const d = distances.get(i);
      const flag = outliers.has(i) ? `<span class="outlier">outlier</span>` : "";
      return (
        `<li data-index="${i}">` +
        `<b>${escapeHtml(a.scenario.target)}</b> given {${escapeHtml(ev)}} ` +
        `&rarr; ${escapeHtml(judged)}` +
        (d === undefined ? "" : ` <span class="num distance">d=${fmt(d)}</span>`) +
        `${flag} <button data-del="${i}">remove</button></li>`
      );
    })
    .join("");
  return `<ol class="assessments">${rows}</ol>`;
}

// -- fit console --------------------------------------------------------------

export function sparkline(trace: number[], width = 160, height = 36): string {
  if (trace.length < 2) return "";
  const max = Math.max(...trace);
  const min = Math.min(...trace);
  const span = max - min || 1;
  const pts = trace
    .map((y, i) => {
      const px = (i / (trace.length - 1)) * width;
      const py = height - ((y - min) / span) * height;
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(" ");
  return (
    `<svg class="spark" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${pts}"/></svg>`
  );
}

export function renderFit(state: {
  status: "idle" | "running" | "done" | "failed" | "stale";
  trace?: number[];
  outliers?: number[];
  error?: string;
}): string {
  switch (state.status) {
    case "idle":
      return `<p class="empty">no fit run yet</p>`;
    case "running":
      return `<p class="running">fitting&hellip;</p>`;
    case "failed":
      return `<p class="error">fit failed: ${escapeHtml(state.error ?? "unknown error")}</p>`;
    case "stale":
      return `<p class="error">fit finished but the session changed meanwhile; result not applied</p>`;
    case "done": {
      const trace = state.trace ?? [];
      const first = trace.length ? fmt(trace[0]!) : "?";
      const last = trace.length ? fmt(trace[trace.length - 1]!) : "?";
      const flags = (state.outliers ?? []).length
        ? `<p class="outliers">flagged assessments: ${state.outliers!.join(", ")}</p>`
        : "";
      return (
        `<p>objective <span class="num" data-fit="first">${first}</span>` +
        ` &rarr; <span class="num" data-fit="last">${last}</span>` +
        ` over ${Math.max(0, trace.length - 1)} epochs</p>${sparkline(trace)}${flags}`
      );
    }
  }
}

// -- errors / undo ------------------------------------------------------------

export interface UiError {
  id: number;
  control: string;
  reason: string;
}

export function renderErrors(errors: UiError[]): string {
  if (!errors.length) return "";
  const items = errors
    .map(
      (e) =>
        `<li class="ui-error" data-control="${escapeHtml(e.control)}">` +
        `${escapeHtml(e.reason)} <button data-dismiss="${e.id}">dismiss</button></li>`,
    )
    .join("");
  return `<ul class="errors">${items}</ul>`;
}

export function renderUndo(labels: readonly string[]): string {
  if (!labels.length) return `<p class="empty">nothing to undo</p>`;
  const items = labels
    .slice()
    .reverse()
    .map((l) => `<li>${escapeHtml(l)}</li>`)
    .join("");
  return `<ol class="undo-stack" reversed>${items}</ol>`;
}
