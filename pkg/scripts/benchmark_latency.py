#!/usr/bin/env python3
"""Latency probe: one factual point scored against 50 retrieved documents.

Reports p50/p90/p99 per matcher. Keyword and hybrid run on pre-tokenized
documents (the production shape: documents are tokenized once per bundle);
the greedy embedding matcher includes only the point-side embedding, with
document embeddings precomputed, again matching the streaming hot path.
"""

import argparse
import random
import statistics
import time

from recite.domain import RetrievedDocument
from recite.embeddings import HashEmbeddingProvider
from recite.scoring import (
    HybridConfig,
    HybridStats,
    score_bertscore,
    score_hybrid,
    score_keyword,
)


def percentile(values, q):
    return sorted(values)[int(len(values) * q)]


def bench(fn, trials):
    timings = []
    for _ in range(trials):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return timings


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=50)
    parser.add_argument("--doc-tokens", type=int, default=512)
    parser.add_argument("--point-tokens", type=int, default=50)
    parser.add_argument("--trials", type=int, default=300)
    parser.add_argument("--dimension", type=int, default=64)
    args = parser.parse_args()

    rng = random.Random(1)
    vocab = [f"tok{i}" for i in range(4000)]
    point_words = rng.sample(vocab, args.point_tokens)
    doc_words = [rng.choices(vocab, k=args.doc_tokens) for _ in range(args.docs)]

    point_tokens = frozenset(point_words)
    doc_tokens = [frozenset(words) for words in doc_words]
    documents = [
        RetrievedDocument(i, f"d{i}", " ".join(words), retrieval_score=rng.random())
        for i, words in enumerate(doc_words)
    ]

    def run_keyword():
        for tokens in doc_tokens:
            score_keyword(point_tokens, tokens)

    keyword_scores = [score_keyword(point_tokens, t) for t in doc_tokens]
    retrieval = [d.retrieval_score for d in documents]
    stats = HybridStats(min(keyword_scores), max(keyword_scores), min(retrieval), max(retrieval))
    config = HybridConfig()

    def run_hybrid():
        for doc, tokens in zip(documents, doc_tokens):
            score_hybrid(point_tokens, doc, tokens, stats, config)

    provider = HashEmbeddingProvider(dimension=args.dimension)
    doc_matrices = [provider.embed_tokens(d.text) for d in documents]
    point_text = " ".join(point_words)

    def run_greedy_embedding():
        point_matrix = provider.embed_tokens(point_text)
        for matrix in doc_matrices:
            score_bertscore(point_matrix, matrix)

    print(f"{args.docs} docs x {args.doc_tokens} tokens, point of {args.point_tokens} tokens, "
          f"{args.trials} trials\n")
    for name, fn in [("keyword", run_keyword), ("hybrid", run_hybrid),
                     ("greedy-embedding", run_greedy_embedding)]:
        timings = bench(fn, args.trials)
        print(f"{name:>18}: p50 {percentile(timings, 0.5) * 1000:7.3f} ms   "
              f"p90 {percentile(timings, 0.9) * 1000:7.3f} ms   "
              f"p99 {percentile(timings, 0.99) * 1000:7.3f} ms   "
              f"mean {statistics.mean(timings) * 1000:7.3f} ms")


if __name__ == "__main__":
    main()
