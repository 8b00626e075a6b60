"""Shared data types and the canonical JSON formats used across the pipeline.

All types here are immutable value objects; they can be shared freely
between threads. Citations are stored 0-based internally, while marker
text in answers is 1-based ("[1]" cites document index 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

_BUNDLE_KEYS = {"query", "documents", "answer"}
_DOCUMENT_KEYS = {"id", "url", "text", "retrieval_score"}


@dataclass(frozen=True)
class Query:
    """The user question the RAG system answered."""

    text: str


@dataclass(frozen=True)
class RetrievedDocument:
    """One retrieved document, positioned by its 0-based retrieval index.

    ``retrieval_score`` is the retriever's relevance score for the query
    (higher means more relevant); it feeds the hybrid matcher. ``extra``
    preserves unknown JSON fields across round-trips.
    """

    index: int
    id: str
    text: str
    retrieval_score: float
    url: str | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RagBundle:
    """One correction job: query, retrieved documents and the raw answer."""

    query: Query
    documents: tuple[RetrievedDocument, ...]
    answer: str
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def document_count(self) -> int:
        return len(self.documents)


@dataclass(frozen=True)
class Citation:
    """A reference to one retrieved document by 0-based index."""

    doc_index: int


@dataclass(frozen=True)
class FactualPoint:
    """A citation-delimited span of the answer.

    ``span`` is a half-open character interval into the raw answer covering
    the point's prose plus its citation markers and any trailing sentence
    punctuation. ``text`` is the span with marker text removed and
    surrounding whitespace stripped. ``marker_spans`` locates each marker
    inside the span so a corrector can splice replacements.
    """

    ordinal: int
    text: str
    span: tuple[int, int]
    citations: tuple[Citation, ...]
    marker_spans: tuple[tuple[int, int], ...] = ()

    @property
    def citation_count(self) -> int:
        return len(self.citations)

    def cited_indices(self) -> tuple[int, ...]:
        return tuple(c.doc_index for c in self.citations)


@dataclass(frozen=True)
class ScoreMatrix:
    """Point-by-document similarity scores for one matcher."""

    matcher_name: str
    values: tuple[tuple[float, ...], ...]

    @property
    def shape(self) -> tuple[int, int]:
        rows = len(self.values)
        return (rows, len(self.values[0]) if rows else 0)


@dataclass(frozen=True)
class PointCorrection:
    """Per-point diagnostics of a correction run."""

    ordinal: int
    text: str
    original_citations: tuple[int, ...]
    corrected_citations: tuple[int, ...]
    scores: tuple[float, ...]
    changed: bool


@dataclass(frozen=True)
class CorrectionResult:
    """Rewritten answer plus per-point before/after records."""

    corrected_answer: str
    points: tuple[PointCorrection, ...]
    diagnostics: tuple[str, ...] = ()


def validate_bundle(bundle: RagBundle, *, check_citations: bool = True) -> list[str]:
    """Check every bundle invariant; returns violations, never raises.

    Each violation names the offending field and the rule broken. An empty
    list means the bundle is well formed. The corrector validates with
    check_citations=False since out-of-range citation markers are exactly
    what it rewrites.
    """
    violations: list[str] = []
    if not bundle.query.text.strip():
        violations.append("query.text: must be non-empty after trimming whitespace")

    docs = bundle.documents
    r = len(docs)
    if r == 0:
        violations.append("documents: must contain at least one document")

    seen: set[int] = set()
    for pos, doc in enumerate(docs):
        if doc.index in seen:
            violations.append(f"documents[{pos}].index: duplicate document index {doc.index}")
        seen.add(doc.index)
        if not doc.text:
            violations.append(f"documents[{pos}].text: must be non-empty")
        if not math.isfinite(doc.retrieval_score):
            violations.append(f"documents[{pos}].retrieval_score: must be finite")
    if r and seen != set(range(r)):
        violations.append(f"documents: indices must be exactly 0..{r - 1}")

    if check_citations:
        # Marker numbers are 1-based in answer text; valid range is 1..R.
        from .segmenter import find_marker_numbers

        for number in find_marker_numbers(bundle.answer):
            if number < 1 or number > r:
                violations.append(f"answer: citation {number} out of range for {r} documents")
    return violations


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def bundle_to_dict(bundle: RagBundle) -> dict[str, Any]:
    docs = []
    for doc in bundle.documents:
        d: dict[str, Any] = {"id": doc.id, "text": doc.text, "retrieval_score": doc.retrieval_score}
        if doc.url is not None:
            d["url"] = doc.url
        d.update({k: v for k, v in doc.extra.items() if k not in _DOCUMENT_KEYS})
        docs.append(d)
    out: dict[str, Any] = {"query": bundle.query.text, "documents": docs, "answer": bundle.answer}
    out.update({k: v for k, v in bundle.extra.items() if k not in _BUNDLE_KEYS})
    return out


def bundle_from_dict(data: Mapping[str, Any]) -> RagBundle:
    """Decode the canonical bundle JSON; document index is list position.

    Unknown fields are preserved in ``extra`` so encode(decode(x)) keeps
    them; they are never an error.
    """
    docs = []
    for pos, d in enumerate(data.get("documents", [])):
        extra = {k: v for k, v in d.items() if k not in _DOCUMENT_KEYS}
        docs.append(
            RetrievedDocument(
                index=pos,
                id=str(d.get("id", str(pos))),
                text=str(d.get("text", "")),
                retrieval_score=float(d.get("retrieval_score", 0.0)),
                url=d.get("url"),
                extra=extra,
            )
        )
    extra = {k: v for k, v in data.items() if k not in _BUNDLE_KEYS}
    return RagBundle(
        query=Query(text=str(data.get("query", ""))),
        documents=tuple(docs),
        answer=str(data.get("answer", "")),
        extra=extra,
    )


def bundle_from_json(text: str) -> RagBundle:
    return bundle_from_dict(json.loads(text))


def bundle_to_json(bundle: RagBundle, indent: int | None = 2) -> str:
    return json.dumps(bundle_to_dict(bundle), ensure_ascii=False, indent=indent)


def point_to_dict(point: FactualPoint) -> dict[str, Any]:
    return {
        "ordinal": point.ordinal,
        "text": point.text,
        "span": list(point.span),
        "citations": [c.doc_index for c in point.citations],
        "marker_spans": [list(s) for s in point.marker_spans],
    }


def point_from_dict(data: Mapping[str, Any]) -> FactualPoint:
    return FactualPoint(
        ordinal=int(data["ordinal"]),
        text=str(data["text"]),
        span=(int(data["span"][0]), int(data["span"][1])),
        citations=tuple(Citation(int(i)) for i in data.get("citations", [])),
        marker_spans=tuple((int(s), int(e)) for s, e in data.get("marker_spans", [])),
    )


def matrix_to_dict(matrix: ScoreMatrix) -> dict[str, Any]:
    return {"matcher_name": matrix.matcher_name, "values": [list(row) for row in matrix.values]}


def matrix_from_dict(data: Mapping[str, Any]) -> ScoreMatrix:
    return ScoreMatrix(
        matcher_name=str(data["matcher_name"]),
        values=tuple(tuple(float(v) for v in row) for row in data["values"]),
    )


def correction_to_dict(result: CorrectionResult) -> dict[str, Any]:
    return {
        "corrected_answer": result.corrected_answer,
        "points": [
            {
                "ordinal": p.ordinal,
                "text": p.text,
                "original_citations": list(p.original_citations),
                "corrected_citations": list(p.corrected_citations),
                "scores": list(p.scores),
                "changed": p.changed,
            }
            for p in result.points
        ],
        "diagnostics": list(result.diagnostics),
    }


def correction_from_dict(data: Mapping[str, Any]) -> CorrectionResult:
    return CorrectionResult(
        corrected_answer=str(data["corrected_answer"]),
        points=tuple(
            PointCorrection(
                ordinal=int(p["ordinal"]),
                text=str(p["text"]),
                original_citations=tuple(int(i) for i in p["original_citations"]),
                corrected_citations=tuple(int(i) for i in p["corrected_citations"]),
                scores=tuple(float(s) for s in p["scores"]),
                changed=bool(p["changed"]),
            )
            for p in data.get("points", [])
        ),
        diagnostics=tuple(str(d) for d in data.get("diagnostics", [])),
    )


def correction_to_json_bytes(result: CorrectionResult) -> bytes:
    """Single serializer shared by the CLI and the HTTP service so both
    produce byte-identical output for the same result."""
    return (json.dumps(correction_to_dict(result), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def iter_jsonl(text: str) -> Iterable[dict[str, Any]]:
    for line in text.splitlines():
        line = line.strip()
        if line:
            yield json.loads(line)
