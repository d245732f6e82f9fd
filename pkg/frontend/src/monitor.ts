/** Process monitoring: run history, aggregate statistics, trend
 * sparklines. The client can re-fold stats from raw reports, which the
 * tests use to cross-check the server's aggregation. */

import { getRunReport, getStats, listRuns } from "./api.js";
import type { ReportJson, RunListEntry, StatsJson } from "./types.js";

/** Pure fold mirroring the server's aggregation rules (population
 * stddev, exact zero for identical samples). */
export function foldStats(reports: ReportJson[]): StatsJson {
  const count = (verdict: string) => reports.filter((r) => r.overall === verdict).length;
  const values = new Map<string, number[]>();
  for (const r of reports) {
    for (const m of r.measurements) {
      if (m.value !== null && m.value !== undefined) {
        if (!values.has(m.name)) values.set(m.name, []);
        values.get(m.name)!.push(m.value);
      }
    }
  }
  const per: StatsJson["per_measurement"] = {};
  for (const name of [...values.keys()].sort()) {
    const vs = values.get(name)!;
    const mean = vs.reduce((a, b) => a + b, 0) / vs.length;
    const min = Math.min(...vs);
    const max = Math.max(...vs);
    const variance = min === max ? 0 : vs.reduce((a, v) => a + (v - mean) ** 2, 0) / vs.length;
    per[name] = { mean, min, max, stddev: Math.sqrt(variance), count: vs.length };
  }
  return {
    total: reports.length,
    pass: count("PASS"),
    fail: count("FAIL"),
    reject: count("REJECT-NO-REGISTRATION"),
    io_error: count("IO-ERROR"),
    per_measurement: per,
  };
}

export function sparkline(values: number[], width = 120, height = 24): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.classList.add("sparkline");
  if (values.length >= 2) {
    const min = Math.min(...values);
    const max = Math.max(...values);
    const span = max - min || 1;
    const step = width / (values.length - 1);
    const points = values
      .map((v, i) => `${(i * step).toFixed(1)},${(height - 2 - ((v - min) / span) * (height - 4)).toFixed(1)}`)
      .join(" ");
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", points);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "#1864ab");
    svg.appendChild(line);
  }
  return svg;
}

export interface MonitorData {
  stats: StatsJson;
  runs: RunListEntry[];
  series: Map<string, number[]>; // measurement -> values in run order
}

export async function loadMonitorData(recipeId: string): Promise<MonitorData> {
  const [stats, runs] = await Promise.all([getStats(recipeId), listRuns(recipeId)]);
  const series = new Map<string, number[]>();
  for (const run of runs) {
    const report = await getRunReport(run.run_id);
    for (const m of report.measurements) {
      if (m.value !== null && m.value !== undefined) {
        if (!series.has(m.name)) series.set(m.name, []);
        series.get(m.name)!.push(m.value);
      }
    }
  }
  return { stats, runs, series };
}

export function renderMonitor(container: HTMLElement, data: MonitorData): void {
  container.innerHTML = "";
  const summary = document.createElement("div");
  summary.className = "stats-summary";
  const s = data.stats;
  summary.textContent =
    `total ${s.total} · pass ${s.pass} · fail ${s.fail} · reject ${s.reject}` +
    (s.io_error ? ` · io ${s.io_error}` : "");
  container.appendChild(summary);

  if (!data.runs.length) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No runs recorded for this recipe yet.";
    container.appendChild(empty);
    return;
  }

  const table = document.createElement("table");
  table.className = "run-history";
  const head = document.createElement("tr");
  for (const col of ["run", "image", "created", "verdict"]) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const run of data.runs) {
    const tr = document.createElement("tr");
    tr.dataset.runId = run.run_id;
    for (const text of [run.run_id, run.image, run.created_at, run.overall]) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    tr.classList.add(run.overall === "PASS" ? "row-pass" : "row-attention");
    table.appendChild(tr);
  }
  container.appendChild(table);

  const trends = document.createElement("div");
  trends.className = "trends";
  for (const [name, values] of [...data.series.entries()].sort()) {
    const row = document.createElement("div");
    row.className = "trend-row";
    row.dataset.measurement = name;
    const label = document.createElement("span");
    label.textContent = name;
    row.appendChild(label);
    row.appendChild(sparkline(values));
    const agg = data.stats.per_measurement[name];
    if (agg) {
      const text = document.createElement("span");
      text.textContent = `mean ${agg.mean.toFixed(3)} · σ ${agg.stddev.toFixed(3)}`;
      row.appendChild(text);
    }
    trends.appendChild(row);
  }
  container.appendChild(trends);
}
