#!/usr/bin/env python3
"""Runs every offline matcher over the shipped demo bundle and prints a
before/after diff of the citations, batch and streaming."""

import random
from pathlib import Path

from recite.corrector import correct, correct_stream
from recite.domain import bundle_from_json
from recite.embeddings import HashEmbeddingProvider

BUNDLE_PATH = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "bundle.json"


def main() -> None:
    bundle = bundle_from_json(BUNDLE_PATH.read_text("utf-8"))
    print(f"query: {bundle.query.text}")
    print(f"answer: {bundle.answer}\n")

    for matcher in ("keyword", "hybrid", "bertscore"):
        kwargs = {}
        if matcher == "bertscore":
            kwargs["embedder"] = HashEmbeddingProvider(dimension=32)
        result = correct(bundle, matcher, **kwargs)
        print(f"--- {matcher} ---")
        print(f"corrected: {result.corrected_answer}")
        for point in result.points:
            arrow = "=>" if point.changed else "=="
            print(f"  point {point.ordinal}: {list(point.original_citations)} {arrow} "
                  f"{list(point.corrected_citations)}  scores={list(point.scores)}")
        print()

    rng = random.Random(0)
    chunks = []
    rest = bundle.answer
    while rest:
        n = rng.randint(1, 9)
        chunks.append(rest[:n])
        rest = rest[n:]
    print(f"--- streaming (keyword, {len(chunks)} chunks) ---")
    for piece in correct_stream(chunks, bundle.documents, "keyword"):
        print(repr(piece))


if __name__ == "__main__":
    main()
