// Wire types of the /v1 audit service. The UI never computes metrics;
// every number rendered comes from these payloads verbatim.

export interface SessionDocument {
  index: number;
  id: string;
  url: string | null;
  text: string;
  retrieval_score: number;
}

export interface SessionFact {
  index: number;
  text: string;
  citations: number[];
  relevant: boolean | null;
  supported_by_citation: boolean | null;
  present_in_any_retrieved_doc: boolean | null;
}

export interface CitedUrl {
  url: string;
  relevant: boolean | null;
}

export interface KeywordEntry {
  text: string;
  relevant: boolean;
}

export interface SubquestionEntry {
  text: string;
  addressed: boolean;
}

export interface Session {
  id: string;
  version: number;
  created_at: string;
  query: string;
  corrected_answer: string;
  documents: SessionDocument[];
  facts: SessionFact[];
  cited_urls: CitedUrl[];
  keywords: KeywordEntry[];
  subquestions: SubquestionEntry[];
}

export type MetricName =
  | "relevancy_url"
  | "relevancy_keywords"
  | "relevancy_facts"
  | "correctness"
  | "completeness";

export const METRIC_NAMES: MetricName[] = [
  "relevancy_url",
  "relevancy_keywords",
  "relevancy_facts",
  "correctness",
  "completeness",
];

export interface QuestionReport {
  question_id: string;
  metrics: Record<MetricName, number>;
  not_applicable: string[];
  incorrectly_cited: number;
  hallucinated: number;
  accuracy: 0 | 1;
}

export interface MqlaReport {
  n: number;
  mean_accuracy: number;
  total_incorrectly_cited: number;
  total_hallucinated: number;
  thresholds: { metric_floor: number; max_hallucinated: number };
  questions: QuestionReport[];
}

export type FactFlag =
  | "relevant"
  | "supported_by_citation"
  | "present_in_any_retrieved_doc";

export interface AnnotationFragment {
  version: number;
  facts?: Array<{ index: number } & Partial<Record<FactFlag, boolean>>>;
  cited_urls?: Array<{ url: string; relevant: boolean }>;
  keywords?: Array<{ text: string; relevant: boolean }>;
  subquestions?: Array<{ text: string; addressed: boolean }>;
}
