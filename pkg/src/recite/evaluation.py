"""Human-judged quality metrics and mean question-level accuracy.

Five per-question ratios (cited-URL relevance, keyword relevance, fact
relevance, correctness, completeness) feed a single gate: a question
scores 1 when every ratio is at least the metric floor (default 0.8) and
it contains at most one hallucinated fact; the report mean is the fraction
of passing questions. Facts unsupported by their citations split into
incorrectly cited (present in some retrieved document, fixable by
re-attribution) versus hallucinated (present nowhere).

A ratio with an empty denominator is reported as 1.0 with an explicit
not-applicable flag so the all-of gate still applies without guessing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence


class AuditFormatError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class AuditedUrl:
    url: str
    relevant: bool


@dataclass(frozen=True)
class AuditedKeyword:
    text: str
    relevant: bool


@dataclass(frozen=True)
class AuditedFact:
    text: str
    relevant: bool
    supported_by_citation: bool
    present_in_any_retrieved_doc: bool


@dataclass(frozen=True)
class AuditedSubquestion:
    text: str
    addressed: bool


@dataclass(frozen=True)
class AuditRecord:
    """One audited question's human judgments."""

    question_id: str
    cited_urls: tuple[AuditedUrl, ...] = ()
    keywords: tuple[AuditedKeyword, ...] = ()
    facts: tuple[AuditedFact, ...] = ()
    subquestions: tuple[AuditedSubquestion, ...] = ()

    def validate(self) -> list[str]:
        violations = []
        if not self.facts:
            violations.append(f"{self.question_id}: at least one fact is required")
        for i, fact in enumerate(self.facts):
            if fact.supported_by_citation and not fact.present_in_any_retrieved_doc:
                violations.append(
                    f"{self.question_id}: facts[{i}] supported_by_citation requires "
                    "present_in_any_retrieved_doc"
                )
        return violations


@dataclass(frozen=True)
class MetricValue:
    value: float
    applicable: bool = True


@dataclass(frozen=True)
class CorrectnessValue(MetricValue):
    incorrectly_cited: int = 0
    hallucinated: int = 0


def _ratio(hits: int, total: int) -> MetricValue:
    if total == 0:
        return MetricValue(1.0, applicable=False)
    return MetricValue(hits / total)


def metric_relevancy_url(record: AuditRecord) -> MetricValue:
    return _ratio(sum(1 for u in record.cited_urls if u.relevant), len(record.cited_urls))


def metric_relevancy_keywords(record: AuditRecord) -> MetricValue:
    return _ratio(sum(1 for k in record.keywords if k.relevant), len(record.keywords))


def metric_relevancy_facts(record: AuditRecord) -> MetricValue:
    return _ratio(sum(1 for f in record.facts if f.relevant), len(record.facts))


def metric_completeness(record: AuditRecord) -> MetricValue:
    return _ratio(sum(1 for s in record.subquestions if s.addressed), len(record.subquestions))


def metric_correctness(record: AuditRecord) -> CorrectnessValue:
    """Fraction of facts supported by their citations, with the unsupported
    remainder decomposed into incorrectly cited vs hallucinated."""
    total = len(record.facts)
    supported = sum(1 for f in record.facts if f.supported_by_citation)
    incorrectly_cited = sum(
        1 for f in record.facts
        if not f.supported_by_citation and f.present_in_any_retrieved_doc
    )
    hallucinated = sum(
        1 for f in record.facts
        if not f.supported_by_citation and not f.present_in_any_retrieved_doc
    )
    base = _ratio(supported, total)
    return CorrectnessValue(base.value, base.applicable, incorrectly_cited, hallucinated)


METRIC_NAMES = (
    "relevancy_url",
    "relevancy_keywords",
    "relevancy_facts",
    "correctness",
    "completeness",
)


@dataclass(frozen=True)
class MqlaThresholds:
    metric_floor: float = 0.8
    max_hallucinated: int = 1


DEFAULT_THRESHOLDS = MqlaThresholds()


@dataclass(frozen=True)
class QuestionResult:
    question_id: str
    metrics: Mapping[str, float]
    not_applicable: tuple[str, ...]
    incorrectly_cited: int
    hallucinated: int
    accuracy: int


@dataclass(frozen=True)
class MqlaReport:
    questions: tuple[QuestionResult, ...]
    mean_accuracy: float
    total_incorrectly_cited: int
    total_hallucinated: int
    thresholds: MqlaThresholds = field(default_factory=MqlaThresholds)

    @property
    def question_count(self) -> int:
        return len(self.questions)


def evaluate_question(record: AuditRecord,
                      thresholds: MqlaThresholds = DEFAULT_THRESHOLDS) -> QuestionResult:
    correctness = metric_correctness(record)
    values: dict[str, MetricValue] = {
        "relevancy_url": metric_relevancy_url(record),
        "relevancy_keywords": metric_relevancy_keywords(record),
        "relevancy_facts": metric_relevancy_facts(record),
        "correctness": correctness,
        "completeness": metric_completeness(record),
    }
    passes = (
        all(v.value >= thresholds.metric_floor for v in values.values())
        and correctness.hallucinated <= thresholds.max_hallucinated
    )
    return QuestionResult(
        question_id=record.question_id,
        metrics={name: values[name].value for name in METRIC_NAMES},
        not_applicable=tuple(name for name in METRIC_NAMES if not values[name].applicable),
        incorrectly_cited=correctness.incorrectly_cited,
        hallucinated=correctness.hallucinated,
        accuracy=1 if passes else 0,
    )


def mqla(records: Sequence[AuditRecord],
         thresholds: MqlaThresholds = DEFAULT_THRESHOLDS) -> MqlaReport:
    if not records:
        raise ValueError("at least one audit record is required")
    questions = tuple(evaluate_question(r, thresholds) for r in records)
    return MqlaReport(
        questions=questions,
        mean_accuracy=sum(q.accuracy for q in questions) / len(questions),
        total_incorrectly_cited=sum(q.incorrectly_cited for q in questions),
        total_hallucinated=sum(q.hallucinated for q in questions),
        thresholds=thresholds,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def record_to_dict(record: AuditRecord) -> dict[str, Any]:
    return {
        "question_id": record.question_id,
        "cited_urls": [{"url": u.url, "relevant": u.relevant} for u in record.cited_urls],
        "keywords": [{"text": k.text, "relevant": k.relevant} for k in record.keywords],
        "facts": [
            {
                "text": f.text,
                "relevant": f.relevant,
                "supported_by_citation": f.supported_by_citation,
                "present_in_any_retrieved_doc": f.present_in_any_retrieved_doc,
            }
            for f in record.facts
        ],
        "subquestions": [{"text": s.text, "addressed": s.addressed} for s in record.subquestions],
    }


def record_from_dict(data: Mapping[str, Any]) -> AuditRecord:
    return AuditRecord(
        question_id=str(data["question_id"]),
        cited_urls=tuple(
            AuditedUrl(str(u["url"]), bool(u["relevant"])) for u in data.get("cited_urls", [])
        ),
        keywords=tuple(
            AuditedKeyword(str(k["text"]), bool(k["relevant"])) for k in data.get("keywords", [])
        ),
        facts=tuple(
            AuditedFact(
                str(f["text"]),
                bool(f["relevant"]),
                bool(f["supported_by_citation"]),
                bool(f["present_in_any_retrieved_doc"]),
            )
            for f in data.get("facts", [])
        ),
        subquestions=tuple(
            AuditedSubquestion(str(s["text"]), bool(s["addressed"]))
            for s in data.get("subquestions", [])
        ),
    )


def load_audit_records(path: str | Path) -> list[AuditRecord]:
    """Read an AuditRecord JSONL file; malformed lines raise AuditFormatError."""
    records = []
    text = Path(path).read_text("utf-8")
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            record = record_from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise AuditFormatError(line_no, str(exc)) from exc
        violations = record.validate()
        if violations:
            raise AuditFormatError(line_no, "; ".join(violations))
        records.append(record)
    if not records:
        raise AuditFormatError(0, "no audit records in file")
    return records


def report_to_dict(report: MqlaReport) -> dict[str, Any]:
    return {
        "n": report.question_count,
        "mean_accuracy": report.mean_accuracy,
        "total_incorrectly_cited": report.total_incorrectly_cited,
        "total_hallucinated": report.total_hallucinated,
        "thresholds": {
            "metric_floor": report.thresholds.metric_floor,
            "max_hallucinated": report.thresholds.max_hallucinated,
        },
        "questions": [
            {
                "question_id": q.question_id,
                "metrics": dict(q.metrics),
                "not_applicable": list(q.not_applicable),
                "incorrectly_cited": q.incorrectly_cited,
                "hallucinated": q.hallucinated,
                "accuracy": q.accuracy,
            }
            for q in report.questions
        ],
    }


def report_to_json_bytes(report: MqlaReport) -> bytes:
    return (json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def format_report_table(report: MqlaReport) -> str:
    """Plain-text summary: one row per question plus totals."""
    headers = ["question", "url", "keyw", "facts", "corr", "compl", "inc.cited", "halluc", "acc"]
    rows = []
    for q in report.questions:
        rows.append([
            q.question_id,
            *(
                f"{q.metrics[name]:.2f}" + ("*" if name in q.not_applicable else "")
                for name in METRIC_NAMES
            ),
            str(q.incorrectly_cited),
            str(q.hallucinated),
            str(q.accuracy),
        ])
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    lines.append("")
    lines.append(
        f"mean question-level accuracy: {report.mean_accuracy:.4f} over {report.question_count} questions"
    )
    lines.append(
        f"unsupported facts: {report.total_incorrectly_cited} incorrectly cited, "
        f"{report.total_hallucinated} hallucinated"
    )
    lines.append("(* metric had no judged items; reported as 1.0, flagged n/a)")
    return "\n".join(lines)


def iter_record_dicts(records: Iterable[AuditRecord]) -> Iterable[dict[str, Any]]:
    for record in records:
        yield record_to_dict(record)
