// Metric dashboard: five gauges with the pass floor drawn in, the
// hallucination budget, and per-question accuracy. Pure client of the
// report endpoint; see gates.ts for the only comparisons performed.

import { type AuditApi } from "./api.js";
import { formatMetric, questionGates } from "./gates.js";
import type { MqlaReport } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderReport(report: MqlaReport, root: HTMLElement): void {
  root.innerHTML = "";
  root.append(el("h1", undefined, "Question-level accuracy report"));
  root.append(el("p", "mean-accuracy",
    `mean accuracy ${report.mean_accuracy} over ${report.n} question(s)`));
  root.append(el("p", "totals",
    `unsupported facts: ${report.total_incorrectly_cited} incorrectly cited, ` +
    `${report.total_hallucinated} hallucinated`));

  for (const question of report.questions) {
    const gates = questionGates(question, report.thresholds);
    const card = el("article", `question-card ${gates.accuracy ? "pass" : "fail"}`);
    card.dataset.questionId = question.question_id;
    card.append(el("h2", undefined,
      `${question.question_id} - accuracy ${gates.accuracy}`));

    const grid = el("div", "metric-grid");
    for (const gate of gates.metrics) {
      const cell = el("div", `metric ${gate.passes ? "pass" : "fail"}`);
      cell.dataset.metric = gate.name;
      const bar = el("div", "bar");
      const fill = el("div", "fill");
      fill.style.width = `${Math.min(1, Math.max(0, gate.value)) * 100}%`;
      const floor = el("div", "floor-line");
      floor.style.left = `${gate.floor * 100}%`;
      bar.append(fill, floor);
      cell.append(
        el("span", "metric-name", gate.name.replace(/_/g, " ")),
        bar,
        el("span", "metric-value",
          formatMetric(gate.value) + (gate.notApplicable ? " (n/a)" : "")),
        el("span", "gate-state", gate.passes ? "pass" : "fail"),
      );
      grid.append(cell);
    }
    card.append(grid);

    const hallucination = el("div",
      `hallucination-gate ${gates.hallucinated.passes ? "pass" : "fail"}`);
    hallucination.append(
      el("span", undefined,
        `hallucinated facts: ${gates.hallucinated.count} (limit ${gates.hallucinated.limit})`),
      el("span", "gate-state", gates.hallucinated.passes ? "pass" : "fail"),
    );
    card.append(hallucination);
    root.append(card);
  }
}

export class ReportView {
  constructor(
    private readonly api: AuditApi,
    private readonly sessionId: string,
    private readonly root: HTMLElement,
  ) {}

  async load(): Promise<void> {
    let report: MqlaReport;
    try {
      report = await this.api.getReport(this.sessionId);
    } catch {
      // stale session id or transient failure: one refetch
      report = await this.api.getReport(this.sessionId);
    }
    renderReport(report, this.root);
  }
}
