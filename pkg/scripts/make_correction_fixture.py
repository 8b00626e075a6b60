#!/usr/bin/env python3
"""Regenerates tests/fixtures/bundle.json and golden_correction.json.

The golden values are hand-verified: with the default tokenizer, point 1
("The wheat crop yield rose sharply .") shares exactly the five tokens
{wheat, crop, yield, rose, sharply} with document 1 and none with the
others; point 2 shares {cricket, match, delayed, heavy, rain} with
document 2 only. Both points are deliberately mis-cited, so keyword
correction must move [2]->[1] and [3]->[2].
"""

import json
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

BUNDLE = {
    "query": "How did the wheat crop perform and why was the cricket match delayed?",
    "documents": [
        {
            "id": "wheat-report",
            "url": "https://example.com/wheat",
            "text": "The wheat crop yield rose sharply after timely rains in the region.",
            "retrieval_score": 0.82,
        },
        {
            "id": "cricket-news",
            "url": "https://example.com/cricket",
            "text": "The cricket match was delayed because heavy rain soaked the pitch.",
            "retrieval_score": 0.61,
        },
        {
            "id": "drill-manual",
            "url": "https://example.com/drill",
            "text": "Mining drill maintenance schedules for deep shafts.",
            "retrieval_score": 0.40,
        },
    ],
    "answer": (
        "The wheat crop yield rose sharply [2]. "
        "The cricket match was delayed by heavy rain [3]."
    ),
}

GOLDEN = {
    "corrected_answer": (
        "The wheat crop yield rose sharply [1]. "
        "The cricket match was delayed by heavy rain [2]."
    ),
    "points": [
        {
            "ordinal": 0,
            "text": "The wheat crop yield rose sharply .",
            "original_citations": [1],
            "corrected_citations": [0],
            "scores": [5.0, 0.0, 0.0],
            "changed": True,
        },
        {
            "ordinal": 1,
            "text": "The cricket match was delayed by heavy rain .",
            "original_citations": [2],
            "corrected_citations": [1],
            "scores": [0.0, 5.0, 0.0],
            "changed": True,
        },
    ],
    "diagnostics": [
        "point 0: selected docs by score: [1]",
        "point 1: selected docs by score: [2]",
    ],
}


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "bundle.json").write_text(
        json.dumps(BUNDLE, ensure_ascii=False, indent=2) + "\n", "utf-8"
    )
    (FIXTURES / "golden_correction.json").write_text(
        json.dumps(GOLDEN, ensure_ascii=False, indent=2) + "\n", "utf-8"
    )
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
