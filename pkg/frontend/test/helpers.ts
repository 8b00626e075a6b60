// Shared test doubles: a fake audit service mirroring the real service's
// fragment-merge and report semantics closely enough to drive the views.

import { ConflictError, type AuditApi } from "../src/api.js";
import { METRIC_NAMES } from "../src/types.js";
import type {
  AnnotationFragment,
  MetricName,
  MqlaReport,
  QuestionReport,
  Session,
} from "../src/types.js";

export function makeSession(overrides: Partial<Session> = {}): Session {
  return {
    id: "s1",
    version: 0,
    created_at: "2026-01-01T00:00:00Z",
    query: "How did the wheat crop perform?",
    corrected_answer: "Wheat yields rose [1]. The match was delayed [2].",
    documents: [
      { index: 0, id: "wheat", url: "https://x/wheat", text: "wheat yields rose", retrieval_score: 0.9 },
      { index: 1, id: "cricket", url: "https://x/cricket", text: "the match was delayed", retrieval_score: 0.5 },
    ],
    facts: [
      { index: 0, text: "Wheat yields rose .", citations: [0],
        relevant: null, supported_by_citation: null, present_in_any_retrieved_doc: null },
      { index: 1, text: "The match was delayed .", citations: [1],
        relevant: null, supported_by_citation: null, present_in_any_retrieved_doc: null },
    ],
    cited_urls: [
      { url: "https://x/wheat", relevant: null },
      { url: "https://x/cricket", relevant: null },
    ],
    keywords: [],
    subquestions: [],
    ...overrides,
  };
}

export function makeReport(
  metrics: Partial<Record<MetricName, number>> = {},
  extras: Partial<QuestionReport> = {},
  thresholds = { metric_floor: 0.8, max_hallucinated: 1 },
): MqlaReport {
  const question: QuestionReport = {
    question_id: "s1",
    metrics: {
      relevancy_url: 1.0,
      relevancy_keywords: 1.0,
      relevancy_facts: 1.0,
      correctness: 1.0,
      completeness: 1.0,
      ...metrics,
    },
    not_applicable: [],
    incorrectly_cited: 0,
    hallucinated: 0,
    accuracy: 1,
    ...extras,
  };
  const gatesPass =
    METRIC_NAMES.every((name) => question.metrics[name] >= thresholds.metric_floor) &&
    question.hallucinated <= thresholds.max_hallucinated;
  question.accuracy = extras.accuracy ?? (gatesPass ? 1 : 0);
  return {
    n: 1,
    mean_accuracy: question.accuracy,
    total_incorrectly_cited: question.incorrectly_cited,
    total_hallucinated: question.hallucinated,
    thresholds,
    questions: [question],
  };
}

/** In-memory stand-in for the audit service. */
export class FakeService implements AuditApi {
  readonly puts: AnnotationFragment[] = [];
  session: Session;

  constructor(session: Session = makeSession()) {
    this.session = session;
  }

  async getSession(): Promise<Session> {
    return structuredClone(this.session);
  }

  async putAnnotations(_id: string, fragment: AnnotationFragment): Promise<number> {
    this.puts.push(structuredClone(fragment));
    if (fragment.version !== this.session.version) {
      throw new ConflictError(this.session.version);
    }
    for (const entry of fragment.facts ?? []) {
      const fact = this.session.facts[entry.index];
      if (!fact) throw new Error(`no fact ${entry.index}`);
      for (const flag of ["relevant", "supported_by_citation",
                          "present_in_any_retrieved_doc"] as const) {
        if (entry[flag] !== undefined) fact[flag] = entry[flag]!;
      }
    }
    for (const entry of fragment.cited_urls ?? []) {
      const url = this.session.cited_urls.find((u) => u.url === entry.url);
      if (!url) throw new Error(`unknown url ${entry.url}`);
      url.relevant = entry.relevant;
    }
    for (const entry of fragment.keywords ?? []) {
      const existing = this.session.keywords.find((k) => k.text === entry.text);
      if (existing) existing.relevant = entry.relevant;
      else this.session.keywords.push({ ...entry });
    }
    for (const entry of fragment.subquestions ?? []) {
      const existing = this.session.subquestions.find((s) => s.text === entry.text);
      if (existing) existing.addressed = entry.addressed;
      else this.session.subquestions.push({ ...entry });
    }
    this.session.version += 1;
    return this.session.version;
  }

  /** Mirrors the server: unjudged toggles count as false. */
  async getReport(): Promise<MqlaReport> {
    const facts = this.session.facts;
    const ratio = (hits: number, total: number) => (total === 0 ? 1.0 : hits / total);
    const supported = facts.filter((f) => f.supported_by_citation === true).length;
    const incorrectlyCited = facts.filter(
      (f) => f.supported_by_citation !== true && f.present_in_any_retrieved_doc === true,
    ).length;
    const hallucinated = facts.filter(
      (f) => f.supported_by_citation !== true && f.present_in_any_retrieved_doc !== true,
    ).length;
    const metrics = {
      relevancy_url: ratio(
        this.session.cited_urls.filter((u) => u.relevant === true).length,
        this.session.cited_urls.length,
      ),
      relevancy_keywords: ratio(
        this.session.keywords.filter((k) => k.relevant).length,
        this.session.keywords.length,
      ),
      relevancy_facts: ratio(facts.filter((f) => f.relevant === true).length, facts.length),
      correctness: ratio(supported, facts.length),
      completeness: ratio(
        this.session.subquestions.filter((s) => s.addressed).length,
        this.session.subquestions.length,
      ),
    };
    return makeReport(metrics, {
      incorrectly_cited: incorrectlyCited,
      hallucinated,
    });
  }
}

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}
