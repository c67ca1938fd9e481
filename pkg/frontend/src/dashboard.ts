/**
 * Iteration dashboard: the per-cycle effort table and per-model metrics.
 *
 * Both views render values exactly as the server sent them: effort cells
 * are verbatim CSV fields and the metrics table is built from the raw JSON
 * payload, which is also retained for byte-level comparison in tests.
 */

import type { ApiClient, EvalReportDoc } from "./api.js";

export interface DashboardData {
  effortCsv: string;
  effortRows: string[][];
  metricsRaw: Record<string, string>;
  metrics: Record<string, EvalReportDoc>;
}

export function parseEffortCsv(text: string): string[][] {
  const lines = text.trim().split("\n");
  return lines.map((line) => line.split(","));
}

export async function loadDashboard(
  client: ApiClient,
  project: string,
  validationSet?: number,
): Promise<DashboardData> {
  const effortCsv = await client.effortReport(project);
  const { models } = await client.listModels(project);
  const metricsRaw: Record<string, string> = {};
  const metrics: Record<string, EvalReportDoc> = {};
  for (const model of models) {
    try {
      const raw = await client.metricsText(project, model, validationSet);
      metricsRaw[model] = raw;
      metrics[model] = JSON.parse(raw);
    } catch {
      // a model without an evaluation yet simply has no row
    }
  }
  return {
    effortCsv,
    effortRows: parseEffortCsv(effortCsv),
    metricsRaw,
    metrics,
  };
}

export function renderDashboard(root: HTMLElement, data: DashboardData): void {
  root.innerHTML = "";
  if (data.effortRows.length <= 1) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No completed cycles yet.";
    root.appendChild(empty);
    return;
  }

  const effortTitle = document.createElement("h3");
  effortTitle.textContent = "Annotation effort";
  root.appendChild(effortTitle);
  root.appendChild(tableFromRows(data.effortRows, "effort-table"));

  const models = Object.keys(data.metrics).sort();
  if (models.length) {
    const title = document.createElement("h3");
    title.textContent = "Model performance";
    root.appendChild(title);
    const header = ["model", "accuracy", "class", "precision", "recall", "f1"];
    const rows: string[][] = [header];
    for (const model of models) {
      const report = data.metrics[model];
      for (const cls of report.class_names) {
        rows.push([
          model,
          String(report.accuracy),
          cls,
          String(report.precision[cls]),
          String(report.recall[cls]),
          String(report.f1[cls]),
        ]);
      }
    }
    root.appendChild(tableFromRows(rows, "metrics-table"));
  }
}

function tableFromRows(rows: string[][], className: string): HTMLTableElement {
  const table = document.createElement("table");
  table.className = className;
  rows.forEach((cells, index) => {
    const tr = document.createElement("tr");
    for (const cell of cells) {
      const td = document.createElement(index === 0 ? "th" : "td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  });
  return table;
}
