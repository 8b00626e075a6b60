"""Re-attributes each factual point to its best-scoring documents.

For every point with C >= 1 citations, the C highest-scoring documents
replace the original citation set (ties broken by higher retrieval score,
then lower document index). Marker text is rewritten in place, rendered
1-based in ascending numeric order; every non-marker byte of the answer is
preserved exactly. Points whose selection equals their original set keep
their original marker bytes, which also makes correction idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .domain import (
    CorrectionResult,
    FactualPoint,
    PointCorrection,
    RagBundle,
    RetrievedDocument,
    validate_bundle,
)
from .scoring import ScoringContext, ScoringError, score_matrix
from .segmenter import DEFAULT_SYNTAX, MarkerSyntax, StreamingSegmenter, segment


class BundleValidationError(Exception):
    def __init__(self, violations: Sequence[str]):
        super().__init__("bundle failed validation: " + "; ".join(violations))
        self.violations = list(violations)


def select_citations(
    score_row: Sequence[float],
    count: int,
    retrieval_scores: Sequence[float] | None = None,
) -> list[int]:
    """Pick the min(count, R) best documents from one score row.

    Repeated argmax under the tie-break (score desc, retrieval score desc,
    index asc); the result is ordered by that same priority. count == 0
    yields an empty list.
    """
    r = len(score_row)
    if r < 1:
        raise ValueError("score row must cover at least one document")
    if count < 0:
        raise ValueError("citation count must be >= 0")
    tie = retrieval_scores if retrieval_scores is not None else [0.0] * r
    remaining = set(range(r))
    picked: list[int] = []
    for _ in range(min(count, r)):
        best = None
        for j in remaining:
            if best is None:
                best = j
                continue
            key_j = (-score_row[j], -tie[j], j)
            key_b = (-score_row[best], -tie[best], best)
            if key_j < key_b:
                best = j
        picked.append(best)
        remaining.discard(best)
    return picked


@dataclass(frozen=True)
class _PointOutcome:
    point: FactualPoint
    scores: tuple[float, ...]
    selected: tuple[int, ...]
    changed: bool
    notes: tuple[str, ...]


def _resolve_point(
    point: FactualPoint,
    row: Sequence[float],
    documents: Sequence[RetrievedDocument],
    keep_margin: float | None,
) -> _PointOutcome:
    notes: list[str] = []
    original = point.cited_indices()
    retrieval = [d.retrieval_score for d in documents]
    wanted = point.citation_count
    if wanted > len(documents):
        notes.append(
            f"point {point.ordinal}: {wanted} citations requested but only "
            f"{len(documents)} documents exist; clamped"
        )
    selected = select_citations(row, wanted, retrieval)

    out_of_range = [i for i in original if not 0 <= i < len(documents)]
    if out_of_range:
        notes.append(
            f"point {point.ordinal}: original citation(s) "
            f"{[i + 1 for i in out_of_range]} out of range"
        )

    changed = set(selected) != set(original)
    if changed and keep_margin is not None and not out_of_range:
        new_total = sum(row[i] for i in selected)
        old_total = sum(row[i] for i in original)
        if new_total - old_total <= keep_margin:
            selected = list(original)
            changed = False
            notes.append(f"point {point.ordinal}: score gap within keep margin; original kept")
    if changed:
        notes.append(
            f"point {point.ordinal}: selected docs by score: {[i + 1 for i in selected]}"
        )
    return _PointOutcome(point, tuple(row), tuple(selected), changed, tuple(notes))


def _splices_for(outcome: _PointOutcome, syntax: MarkerSyntax) -> list[tuple[int, int, str]]:
    if not outcome.changed or not outcome.point.marker_spans:
        return []
    spans = outcome.point.marker_spans
    rendered = syntax.render(outcome.selected)
    out = [(spans[0][0], spans[0][1], rendered)]
    # extra markers of a merged run are emptied; the gap bytes between them
    # are not marker text and must survive
    out.extend((s, e, "") for s, e in spans[1:])
    return out


def _apply_splices(text: str, splices: Sequence[tuple[int, int, str]], base: int = 0) -> str:
    pieces = []
    prev = 0
    for start, end, replacement in splices:
        pieces.append(text[prev: start - base])
        pieces.append(replacement)
        prev = end - base
    pieces.append(text[prev:])
    return "".join(pieces)


def _to_result(answer: str, outcomes: Sequence[_PointOutcome], syntax: MarkerSyntax,
               extra_diagnostics: Iterable[str] = ()) -> CorrectionResult:
    splices: list[tuple[int, int, str]] = []
    for outcome in outcomes:
        splices.extend(_splices_for(outcome, syntax))
    splices.sort(key=lambda s: s[0])
    diagnostics: list[str] = []
    for outcome in outcomes:
        diagnostics.extend(outcome.notes)
    diagnostics.extend(extra_diagnostics)
    return CorrectionResult(
        corrected_answer=_apply_splices(answer, splices),
        points=tuple(
            PointCorrection(
                ordinal=o.point.ordinal,
                text=o.point.text,
                original_citations=o.point.cited_indices(),
                corrected_citations=o.selected,
                scores=o.scores,
                changed=o.changed,
            )
            for o in outcomes
        ),
        diagnostics=tuple(diagnostics),
    )


def correct(
    bundle: RagBundle,
    matcher: str = "keyword",
    *,
    context: ScoringContext | None = None,
    syntax: MarkerSyntax = DEFAULT_SYNTAX,
    keep_margin: float | None = None,
    **context_kwargs,
) -> CorrectionResult:
    """Segment, score and re-cite a complete answer.

    Scorer and provider errors abort before any output is assembled, so a
    failed run never yields a partially rewritten answer. Uncited points
    (C = 0) are left untouched and skip scoring entirely.
    """
    violations = validate_bundle(bundle, check_citations=False)
    if violations:
        raise BundleValidationError(violations)
    ctx = context or ScoringContext(bundle.documents, **context_kwargs)
    points = segment(bundle.answer, bundle.document_count, syntax)
    cited = [p for p in points if p.citation_count]
    matrix = score_matrix(bundle, cited, matcher, context=ctx)
    rows = {p.ordinal: row for p, row in zip(cited, matrix.values)}
    outcomes = []
    for point in points:
        if point.citation_count == 0:
            outcomes.append(_PointOutcome(point, (), (), False, ()))
        else:
            outcomes.append(
                _resolve_point(point, rows[point.ordinal], bundle.documents, keep_margin)
            )
    return _to_result(bundle.answer, outcomes, syntax, ctx.diagnostics)


class StreamingCorrector:
    """Single-owner corrector over an answer chunk stream.

    Documents and the query are known before generation starts (retrieval
    precedes generation in RAG), so each point can be scored the moment its
    marker closes. Prose streams through eagerly; only the region from a
    marker's opening bracket until the marker run resolves is withheld.
    Concatenated output equals batch correct() on the joined answer. On a
    mid-stream scorer failure the remaining input passes through unmodified
    and the result is flagged partially corrected.
    """

    def __init__(
        self,
        documents: Sequence[RetrievedDocument],
        matcher: str = "keyword",
        *,
        context: ScoringContext | None = None,
        syntax: MarkerSyntax = DEFAULT_SYNTAX,
        keep_margin: float | None = None,
        bundle: RagBundle | None = None,
        **context_kwargs,
    ):
        self._documents = tuple(documents)
        self._matcher = matcher
        self._ctx = context or ScoringContext(self._documents, **context_kwargs)
        self._syntax = syntax
        self._keep_margin = keep_margin
        self._bundle = bundle
        self._segmenter = StreamingSegmenter(len(self._documents), syntax)
        self._text = ""
        self._emitted = 0
        self._outcomes: list[_PointOutcome] = []
        self._failed: str | None = None
        self._finished = False

    def _score(self, point: FactualPoint) -> list[float]:
        bundle = self._bundle
        if bundle is None and self._matcher == "llm":
            raise ScoringError("llm matcher needs the full bundle", point_ordinal=point.ordinal)
        return self._ctx.row(point, self._matcher, bundle)

    def _emit_point(self, point: FactualPoint) -> str:
        if point.citation_count == 0:
            outcome = _PointOutcome(point, (), (), False, ())
        else:
            row = self._score(point)
            outcome = _resolve_point(point, row, self._documents, self._keep_margin)
        self._outcomes.append(outcome)
        start = max(self._emitted, point.span[0])
        piece = _apply_splices(
            self._text[start: point.span[1]],
            _splices_for(outcome, self._syntax),
            base=start,
        )
        self._emitted = point.span[1]
        return piece

    def feed(self, chunk: str) -> str:
        if self._finished:
            raise RuntimeError("stream already finished")
        self._text += chunk
        if self._failed is not None:
            out = self._text[self._emitted:]
            self._emitted = len(self._text)
            return out
        out = []
        try:
            for point in self._segmenter.feed(chunk):
                out.append(self._emit_point(point))
        except ScoringError as exc:
            self._failed = str(exc)
            out.append(self._text[self._emitted:])
            self._emitted = len(self._text)
            return "".join(out)
        boundary = self._segmenter.stable_boundary
        if boundary > self._emitted:
            out.append(self._text[self._emitted: boundary])
            self._emitted = boundary
        return "".join(out)

    def finish(self) -> tuple[str, CorrectionResult]:
        """Flush the stream; returns (remaining output, result)."""
        if self._finished:
            raise RuntimeError("stream already finished")
        self._finished = True
        out = []
        if self._failed is None:
            try:
                for point in self._segmenter.flush():
                    out.append(self._emit_point(point))
            except ScoringError as exc:
                self._failed = str(exc)
        if self._emitted < len(self._text):
            out.append(self._text[self._emitted:])
            self._emitted = len(self._text)
        extra = []
        if self._failed is not None:
            extra.append(f"partially corrected: {self._failed}")
        # Replaying the completed points' splices over the full text equals
        # the streamed concatenation: failed/unreached points contributed no
        # splices, so their bytes stay raw in both.
        result = _to_result(self._text, self._outcomes, self._syntax,
                            list(self._ctx.diagnostics) + extra)
        return "".join(out), result


def correct_stream(
    chunks: Iterable[str],
    documents: Sequence[RetrievedDocument],
    matcher: str = "keyword",
    **kwargs,
) -> Iterator[str]:
    """Generator form of StreamingCorrector; yields corrected chunks."""
    session = StreamingCorrector(documents, matcher, **kwargs)
    for chunk in chunks:
        piece = session.feed(chunk)
        if piece:
            yield piece
    tail, _ = session.finish()
    if tail:
        yield tail
