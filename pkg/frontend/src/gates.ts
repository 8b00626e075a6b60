// Pass/fail presentation of the server-computed report. Values and
// thresholds both come from the report payload; the only logic here is
// the comparison that the dashboard visualizes.

import { METRIC_NAMES, type MetricName, type QuestionReport } from "./types.js";

export interface GateStatus {
  name: MetricName;
  value: number;
  floor: number;
  passes: boolean;
  notApplicable: boolean;
}

export interface QuestionGates {
  metrics: GateStatus[];
  hallucinated: { count: number; limit: number; passes: boolean };
  accuracy: 0 | 1;
}

export function questionGates(
  question: QuestionReport,
  thresholds: { metric_floor: number; max_hallucinated: number },
): QuestionGates {
  const metrics = METRIC_NAMES.map((name) => ({
    name,
    value: question.metrics[name],
    floor: thresholds.metric_floor,
    passes: question.metrics[name] >= thresholds.metric_floor,
    notApplicable: question.not_applicable.includes(name),
  }));
  return {
    metrics,
    hallucinated: {
      count: question.hallucinated,
      limit: thresholds.max_hallucinated,
      passes: question.hallucinated <= thresholds.max_hallucinated,
    },
    accuracy: question.accuracy,
  };
}

export function formatMetric(value: number): string {
  return value.toFixed(2);
}
