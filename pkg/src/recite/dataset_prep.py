"""Builds (factual point, positive reference, negative reference) triplets
for fine-tuning token-level matchers.

Two mining strategies:

* similar_doc: for each corpus document D and each rank n in the hardness
  schedule (default [14, 11, 8, 5, 4, 3], progressively harder), take D's
  n-th most similar document N and ask an LLM for a factual point present
  in D but not in N; emit (point, positive=D, negative=N, hardness=n).
* rag_grounding: segment RAG answers into factual points, ask an LLM for a
  grounded/not-grounded verdict per (point, document), and pair each
  grounded document with each ungrounded one, nearest retrieval scores
  first, capped per point.

Per-item failures are logged and skipped, never fatal; the file runners
checkpoint (cursor, byte offset) after every item so an interrupted run
resumes without duplicating output lines.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping, Protocol, Sequence

import numpy as np

from .domain import RagBundle
from .embeddings import EmbeddingProvider
from .llm_matcher import LlmClient
from .segmenter import segment

logger = logging.getLogger(__name__)

DEFAULT_HARDNESS_SCHEDULE = (14, 11, 8, 5, 4, 3)
DEFAULT_MAX_PAIRS_PER_POINT = 4

STRATEGY_SIMILAR_DOC = "similar_doc"
STRATEGY_RAG_GROUNDING = "rag_grounding"

REFUSAL_TOKEN = "NONE"

FACT_PROMPT_TEMPLATE = (
    "Here are two documents.\n\n"
    "Document A:\n{positive}\n\n"
    "Document B:\n{negative}\n\n"
    "State one factual point that is present in Document A but not in\n"
    "Document B. Reply with the factual point as a single sentence and\n"
    "nothing else. If you cannot, reply {refusal}.\n"
)

GROUNDING_PROMPT_TEMPLATE = (
    "Statement: {point}\n\n"
    "Document:\n{document}\n\n"
    "Is the statement grounded in the document? Reply with exactly one\n"
    "word: yes or no.\n"
)

GROUNDING_REMINDER = "\nReply with exactly one word: yes or no.\n"


@dataclass(frozen=True)
class Triplet:
    factual_point: str
    positive_doc_id: str
    negative_doc_id: str
    strategy: str
    hardness_n: int | None = None

    def __post_init__(self) -> None:
        if self.positive_doc_id == self.negative_doc_id:
            raise ValueError("positive and negative documents must differ")
        if (self.strategy == STRATEGY_SIMILAR_DOC) != (self.hardness_n is not None):
            raise ValueError("hardness_n is present exactly for similar_doc triplets")


def triplet_to_dict(triplet: Triplet) -> dict[str, Any]:
    out: dict[str, Any] = {
        "factual_point": triplet.factual_point,
        "positive_doc_id": triplet.positive_doc_id,
        "negative_doc_id": triplet.negative_doc_id,
        "strategy": triplet.strategy,
    }
    if triplet.hardness_n is not None:
        out["hardness_n"] = triplet.hardness_n
    return out


def triplet_from_dict(data: Mapping[str, Any]) -> Triplet:
    return Triplet(
        factual_point=str(data["factual_point"]),
        positive_doc_id=str(data["positive_doc_id"]),
        negative_doc_id=str(data["negative_doc_id"]),
        strategy=str(data["strategy"]),
        hardness_n=data.get("hardness_n"),
    )


@dataclass(frozen=True)
class CorpusDocument:
    id: str
    text: str


def load_corpus(path: str | Path) -> list[CorpusDocument]:
    docs = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip()
        if line:
            record = json.loads(line)
            docs.append(CorpusDocument(id=str(record["id"]), text=str(record["text"])))
    return docs


class SimilarityBackend(Protocol):
    """Document-level similarity ranking over a fixed corpus."""

    def rank(self, doc_id: str) -> Sequence[str]:
        """All other document ids ordered most-similar first."""
        ...


class EmbeddingSimilarityBackend:
    """Ranks neighbors by cosine of mean-pooled token embeddings.

    Deterministic given a deterministic provider; ties break on document
    id so rankings are total. The backing provider's identity is exposed
    for output metadata.
    """

    def __init__(self, corpus: Sequence[CorpusDocument], provider: EmbeddingProvider):
        self._corpus = list(corpus)
        self._provider = provider
        self._vectors: dict[str, np.ndarray] = {}
        for doc in self._corpus:
            matrix = provider.embed_tokens(doc.text)
            pooled = matrix.vectors.mean(axis=0)
            self._vectors[doc.id] = pooled / np.linalg.norm(pooled)

    @property
    def identity(self) -> str:
        return self._provider.descriptor.cache_id

    def rank(self, doc_id: str) -> list[str]:
        anchor = self._vectors[doc_id]
        scored = [
            (float(anchor @ self._vectors[d.id]), d.id)
            for d in self._corpus
            if d.id != doc_id
        ]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [doc_id for _, doc_id in scored]


@dataclass
class PrepCounters:
    emitted: int = 0
    skipped_refusal: int = 0
    skipped_rank: int = 0
    skipped_verdict: int = 0
    failed: int = 0


def build_fact_prompt(positive_text: str, negative_text: str) -> str:
    return FACT_PROMPT_TEMPLATE.format(
        positive=positive_text, negative=negative_text, refusal=REFUSAL_TOKEN
    )


def build_grounding_prompt(point_text: str, document_text: str) -> str:
    return GROUNDING_PROMPT_TEMPLATE.format(point=point_text, document=document_text)


def parse_verdict(reply: str) -> bool | None:
    word = reply.strip().rstrip(".!").lower()
    if word == "yes":
        return True
    if word == "no":
        return False
    return None


def _similar_doc_events(
    corpus: Sequence[CorpusDocument],
    backend: SimilarityBackend,
    client: LlmClient,
    schedule: Sequence[int],
    counters: PrepCounters,
) -> Iterator[tuple[int, Triplet | None]]:
    by_id = {d.id: d for d in corpus}
    flat = 0
    for doc in corpus:
        ranking = None
        for n in schedule:
            triplet = None
            try:
                if ranking is None:
                    ranking = backend.rank(doc.id)
                if n > len(ranking):
                    counters.skipped_rank += 1
                    logger.info("doc %s: rank %d exceeds corpus size; skipped", doc.id, n)
                else:
                    negative = by_id[ranking[n - 1]]
                    reply = client.complete(build_fact_prompt(doc.text, negative.text)).strip()
                    if not reply or reply == REFUSAL_TOKEN:
                        counters.skipped_refusal += 1
                    else:
                        triplet = Triplet(
                            factual_point=reply,
                            positive_doc_id=doc.id,
                            negative_doc_id=negative.id,
                            strategy=STRATEGY_SIMILAR_DOC,
                            hardness_n=n,
                        )
                        counters.emitted += 1
            except Exception as exc:  # noqa: BLE001 - per-item isolation
                counters.failed += 1
                logger.warning("doc %s rank %d failed: %s", doc.id, n, exc)
            yield flat, triplet
            flat += 1


def iter_similar_doc_triplets(
    corpus: Sequence[CorpusDocument],
    backend: SimilarityBackend,
    client: LlmClient,
    schedule: Sequence[int] = DEFAULT_HARDNESS_SCHEDULE,
    counters: PrepCounters | None = None,
) -> Iterator[Triplet]:
    counters = counters if counters is not None else PrepCounters()
    for _, triplet in _similar_doc_events(corpus, backend, client, schedule, counters):
        if triplet is not None:
            yield triplet


def _grounding_verdicts(
    point_text: str,
    bundle: RagBundle,
    client: LlmClient,
    counters: PrepCounters,
) -> dict[int, bool]:
    verdicts: dict[int, bool] = {}
    for doc in bundle.documents:
        prompt = build_grounding_prompt(point_text, doc.text)
        verdict = parse_verdict(client.complete(prompt))
        if verdict is None:
            verdict = parse_verdict(client.complete(prompt + GROUNDING_REMINDER))
        if verdict is None:
            counters.skipped_verdict += 1
            logger.info("no yes/no verdict for doc %s; pair skipped", doc.id)
            continue
        verdicts[doc.index] = verdict
    return verdicts


def _grounding_events(
    bundles: Sequence[RagBundle],
    client: LlmClient,
    max_pairs_per_point: int,
    counters: PrepCounters,
) -> Iterator[tuple[int, list[Triplet]]]:
    flat = 0
    for bundle in bundles:
        points = segment(bundle.answer, bundle.document_count)
        for point in points:
            triplets: list[Triplet] = []
            try:
                verdicts = _grounding_verdicts(point.text, bundle, client, counters)
                grounded = [i for i, ok in sorted(verdicts.items()) if ok]
                ungrounded = [i for i, ok in sorted(verdicts.items()) if not ok]
                pairs = [
                    (abs(bundle.documents[g].retrieval_score - bundle.documents[u].retrieval_score), g, u)
                    for g in grounded
                    for u in ungrounded
                ]
                pairs.sort()
                for _, g, u in pairs[:max_pairs_per_point]:
                    triplets.append(
                        Triplet(
                            factual_point=point.text,
                            positive_doc_id=bundle.documents[g].id,
                            negative_doc_id=bundle.documents[u].id,
                            strategy=STRATEGY_RAG_GROUNDING,
                        )
                    )
                counters.emitted += len(triplets)
            except Exception as exc:  # noqa: BLE001 - per-item isolation
                counters.failed += 1
                logger.warning("grounding point %d failed: %s", point.ordinal, exc)
                triplets = []
            yield flat, triplets
            flat += 1


def iter_grounding_triplets(
    bundles: Sequence[RagBundle],
    client: LlmClient,
    max_pairs_per_point: int = DEFAULT_MAX_PAIRS_PER_POINT,
    counters: PrepCounters | None = None,
) -> Iterator[Triplet]:
    counters = counters if counters is not None else PrepCounters()
    for _, triplets in _grounding_events(bundles, client, max_pairs_per_point, counters):
        yield from triplets


# ---------------------------------------------------------------------------
# Checkpointed file runners
# ---------------------------------------------------------------------------

def _read_checkpoint(path: Path) -> tuple[int, int]:
    if path.exists():
        data = json.loads(path.read_text("utf-8"))
        return int(data["cursor"]), int(data["offset"])
    return 0, 0


def _write_checkpoint(path: Path, cursor: int, offset: int) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps({"cursor": cursor, "offset": offset}), "utf-8")
    os.replace(tmp, path)


def _run_events(
    events: Iterator[tuple[int, list[Triplet]]],
    out_path: str | Path,
    checkpoint_path: str | Path | None,
    metadata: Mapping[str, Any] | None = None,
) -> int:
    """Drain an event stream into a triplet JSONL file, exactly once per item.

    The checkpoint stores (items completed, output byte offset); resuming
    truncates any partial tail and skips completed items, so a rerun after
    a crash matches an uninterrupted run byte for byte.
    """
    out_path = Path(out_path)
    cursor, offset = (0, 0)
    if checkpoint_path is not None:
        cursor, offset = _read_checkpoint(Path(checkpoint_path))
    mode = "r+" if out_path.exists() and cursor else "w"
    written = 0
    with open(out_path, mode, encoding="utf-8") as fh:
        if mode == "r+":
            fh.seek(offset)
            fh.truncate(offset)
        elif metadata:
            fh.write(json.dumps({"_metadata": dict(metadata)}) + "\n")
            fh.flush()
        for index, triplets in events:
            if index < cursor:
                continue
            for triplet in triplets:
                fh.write(json.dumps(triplet_to_dict(triplet), ensure_ascii=False) + "\n")
                written += 1
            fh.flush()
            if checkpoint_path is not None:
                _write_checkpoint(Path(checkpoint_path), index + 1, fh.tell())
    return written


def run_similar_doc_prep(
    corpus: Sequence[CorpusDocument],
    backend: SimilarityBackend,
    client: LlmClient,
    out_path: str | Path,
    checkpoint_path: str | Path | None = None,
    schedule: Sequence[int] = DEFAULT_HARDNESS_SCHEDULE,
    backend_identity: str | None = None,
) -> PrepCounters:
    counters = PrepCounters()
    metadata = {
        "strategy": STRATEGY_SIMILAR_DOC,
        "hardness_schedule": list(schedule),
        "similarity_backend": backend_identity or getattr(backend, "identity", "custom"),
    }
    events = (
        (index, [] if triplet is None else [triplet])
        for index, triplet in _similar_doc_events(corpus, backend, client, schedule, counters)
    )
    _run_events(events, out_path, checkpoint_path, metadata)
    return counters


def run_grounding_prep(
    bundles: Sequence[RagBundle],
    client: LlmClient,
    out_path: str | Path,
    checkpoint_path: str | Path | None = None,
    max_pairs_per_point: int = DEFAULT_MAX_PAIRS_PER_POINT,
) -> PrepCounters:
    counters = PrepCounters()
    metadata = {"strategy": STRATEGY_RAG_GROUNDING, "max_pairs_per_point": max_pairs_per_point}
    _run_events(
        _grounding_events(bundles, client, max_pairs_per_point, counters),
        out_path, checkpoint_path, metadata,
    )
    return counters
