"""Similarity functions between factual points and retrieved documents.

Three native matchers plus a dispatch surface:

* keyword: size of the token-set intersection (token counts overlap in
  multiset mode).
* hybrid: keyword blended with the retriever's own relevance score. Both
  terms are min-max normalized per point across the bundle's documents
  before mixing, so the keyword weight keeps its meaning across
  retrievers with different score scales; a degenerate term (max == min)
  normalizes to 0 for every document.
* bertscore: token-level greedy matching over contextual embeddings; for
  each point token take the max dot product over document tokens, then
  average over the point's tokens (recall direction only, no idf).

The "llm" matcher name dispatches to llm_matcher.match_point.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import FactualPoint, RagBundle, RetrievedDocument, ScoreMatrix
from .embeddings import EmbeddingProvider, TokenEmbeddingMatrix
from .tokenizer import DEFAULT_CONFIG, TokenCollection, TokenizerConfig, tokenize

MATCHERS = ("keyword", "hybrid", "bertscore", "llm")

EMPTY_DOC_SCORE = -1.0  # worst possible greedy-match score for an empty document


class ScoringError(Exception):
    """Scoring failed; names the point (and document, when known)."""

    def __init__(self, message: str, point_ordinal: int | None = None,
                 doc_index: int | None = None):
        super().__init__(message)
        self.point_ordinal = point_ordinal
        self.doc_index = doc_index


@dataclass(frozen=True)
class HybridConfig:
    """keyword_weight is the mixing weight on the lexical term (0..1)."""

    keyword_weight: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.keyword_weight <= 1.0:
            raise ValueError("keyword_weight must be in [0, 1]")


@dataclass(frozen=True)
class HybridStats:
    """Per-point min/max envelopes across the bundle's R documents."""

    keyword_min: float
    keyword_max: float
    retrieval_min: float
    retrieval_max: float


def score_keyword(point_tokens: TokenCollection, doc_tokens: TokenCollection) -> float:
    """Token overlap between a point and a document; 0 when either is empty."""
    if not point_tokens or not doc_tokens:
        return 0.0
    overlap = point_tokens & doc_tokens
    if isinstance(overlap, Counter):
        return float(sum(overlap.values()))
    return float(len(overlap))


def _minmax(value: float, lo: float, hi: float) -> float:
    if hi == lo:
        return 0.0
    return (value - lo) / (hi - lo)


def score_hybrid(
    point_tokens: TokenCollection,
    doc: RetrievedDocument,
    doc_tokens: TokenCollection,
    stats: HybridStats,
    config: HybridConfig = HybridConfig(),
) -> float:
    keyword_norm = _minmax(score_keyword(point_tokens, doc_tokens), stats.keyword_min, stats.keyword_max)
    retrieval_norm = _minmax(doc.retrieval_score, stats.retrieval_min, stats.retrieval_max)
    return config.keyword_weight * keyword_norm + (1.0 - config.keyword_weight) * retrieval_norm


def score_bertscore(point_embeddings: TokenEmbeddingMatrix,
                    doc_embeddings: TokenEmbeddingMatrix) -> float:
    """Mean over point tokens of the max similarity over document tokens.

    Both matrices must come from the same provider. An empty document
    scores -1.0, the floor of the cosine range. The result is invariant
    under permutation of document token order but not symmetric in its
    arguments.
    """
    if len(point_embeddings) == 0:
        raise ValueError("point must have at least one token")
    if point_embeddings.dimension != doc_embeddings.dimension:
        raise ScoringError(
            f"embedding dimensions differ: {point_embeddings.dimension} vs {doc_embeddings.dimension}"
        )
    if len(doc_embeddings) == 0:
        import logging

        logging.getLogger(__name__).warning("empty document token list; scoring %s", EMPTY_DOC_SCORE)
        return EMPTY_DOC_SCORE
    # einsum reduces each (l, k) cell independently, so permuting document
    # tokens permutes columns without perturbing any pairwise product; BLAS
    # matmul does not guarantee that bit-stability.
    similarities = np.einsum("ld,kd->lk", point_embeddings.vectors, doc_embeddings.vectors)
    return float(np.mean(np.max(similarities, axis=1)))


class ScoringContext:
    """Per-bundle state shared across point scorers.

    Document token sets and embeddings are computed once and reused for
    every point (correction re-scores the same R documents per point).
    Construction is cheap; heavy work happens lazily on first use.
    """

    def __init__(
        self,
        documents: Sequence[RetrievedDocument],
        *,
        tokenizer_config: TokenizerConfig = DEFAULT_CONFIG,
        hybrid_config: HybridConfig | None = None,
        embedder: EmbeddingProvider | None = None,
        llm_client=None,
        llm_prompt_config=None,
        llm_max_in_flight: int = 1,
    ):
        self.documents = tuple(documents)
        self.tokenizer_config = tokenizer_config
        self.hybrid_config = hybrid_config or HybridConfig()
        self.embedder = embedder
        self.llm_client = llm_client
        self.llm_prompt_config = llm_prompt_config
        # >1 parallelizes the per-point LLM calls; 1 keeps sequential-replay
        # fixtures deterministic
        self.llm_max_in_flight = max(1, llm_max_in_flight)
        self._doc_tokens: list[TokenCollection] | None = None
        self._doc_embeddings: list[TokenEmbeddingMatrix] | None = None
        self.diagnostics: list[str] = []

    @property
    def doc_tokens(self) -> list[TokenCollection]:
        if self._doc_tokens is None:
            self._doc_tokens = [tokenize(d.text, self.tokenizer_config) for d in self.documents]
        return self._doc_tokens

    @property
    def doc_embeddings(self) -> list[TokenEmbeddingMatrix]:
        if self._doc_embeddings is None:
            if self.embedder is None:
                raise ScoringError("bertscore matcher requires an embedding provider")
            out = []
            for doc in self.documents:
                try:
                    out.append(self.embedder.embed_tokens(doc.text))
                except Exception as exc:
                    raise ScoringError(
                        f"embedding document {doc.index} failed: {exc}", doc_index=doc.index
                    ) from exc
            self._doc_embeddings = out
        return self._doc_embeddings

    def keyword_row(self, point: FactualPoint) -> list[float]:
        point_tokens = tokenize(point.text, self.tokenizer_config)
        return [score_keyword(point_tokens, dt) for dt in self.doc_tokens]

    def hybrid_row(self, point: FactualPoint) -> list[float]:
        point_tokens = tokenize(point.text, self.tokenizer_config)
        keyword_scores = [score_keyword(point_tokens, dt) for dt in self.doc_tokens]
        retrieval_scores = [d.retrieval_score for d in self.documents]
        stats = HybridStats(
            keyword_min=min(keyword_scores),
            keyword_max=max(keyword_scores),
            retrieval_min=min(retrieval_scores),
            retrieval_max=max(retrieval_scores),
        )
        return [
            score_hybrid(point_tokens, doc, tokens, stats, self.hybrid_config)
            for doc, tokens in zip(self.documents, self.doc_tokens)
        ]

    def bertscore_row(self, point: FactualPoint) -> list[float]:
        if self.embedder is None:
            raise ScoringError("bertscore matcher requires an embedding provider",
                               point_ordinal=point.ordinal)
        try:
            point_matrix = self.embedder.embed_tokens(point.text)
        except Exception as exc:
            raise ScoringError(
                f"embedding point {point.ordinal} failed: {exc}", point_ordinal=point.ordinal
            ) from exc
        row = []
        for doc, doc_matrix in zip(self.documents, self.doc_embeddings):
            try:
                row.append(score_bertscore(point_matrix, doc_matrix))
            except ValueError as exc:
                raise ScoringError(
                    f"scoring point {point.ordinal} against document {doc.index} failed: {exc}",
                    point_ordinal=point.ordinal, doc_index=doc.index,
                ) from exc
        return row

    def llm_row(self, point: FactualPoint, bundle: RagBundle) -> list[float]:
        from .llm_matcher import match_point

        if self.llm_client is None:
            raise ScoringError("llm matcher requires a client", point_ordinal=point.ordinal)
        return match_point(
            point, bundle, self.llm_client,
            prompt_config=self.llm_prompt_config,
            tokenizer_config=self.tokenizer_config,
            diagnostics=self.diagnostics,
        )

    def row(self, point: FactualPoint, matcher: str, bundle: RagBundle | None = None) -> list[float]:
        if matcher == "keyword":
            return self.keyword_row(point)
        if matcher == "hybrid":
            return self.hybrid_row(point)
        if matcher == "bertscore":
            return self.bertscore_row(point)
        if matcher == "llm":
            if bundle is None:
                raise ScoringError("llm matcher needs the full bundle", point_ordinal=point.ordinal)
            return self.llm_row(point, bundle)
        raise ScoringError(f"unknown matcher {matcher!r}; expected one of {MATCHERS}")


def score_matrix(
    bundle: RagBundle,
    points: Sequence[FactualPoint],
    matcher: str,
    context: ScoringContext | None = None,
    **context_kwargs,
) -> ScoreMatrix:
    """Score every point against every document under the selected matcher.

    LLM rows for distinct points run concurrently up to the context's
    in-flight cap; results are joined by point order either way.
    """
    ctx = context or ScoringContext(bundle.documents, **context_kwargs)
    if matcher == "llm" and ctx.llm_max_in_flight > 1 and len(points) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=ctx.llm_max_in_flight) as pool:
            rows = list(pool.map(lambda p: ctx.row(p, matcher, bundle), points))
        values = tuple(tuple(row) for row in rows)
    else:
        values = tuple(tuple(ctx.row(point, matcher, bundle)) for point in points)
    return ScoreMatrix(matcher_name=matcher, values=values)
