#!/usr/bin/env python3
"""Regenerates tests/fixtures/audits_10q.jsonl.

Ten audited questions covering both accuracy gates at their boundaries
(metric 0.8 passes / 0.79 fails, 1 hallucinated passes / 2 fail), the
zero-denominator rule and the incorrectly-cited vs hallucinated
decomposition. Expected results are hand-computed and frozen in
tests/test_evaluation.py and tests/test_acceptance.py.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "audits_10q.jsonl"


def urls(relevant, total):
    return [{"url": f"https://example.com/{i}", "relevant": i < relevant} for i in range(total)]


def keywords(relevant, total):
    return [{"text": f"kw{i}", "relevant": i < relevant} for i in range(total)]


def subquestions(addressed, total):
    return [{"text": f"sub{i}", "addressed": i < addressed} for i in range(total)]


def fact(supported, present, relevant=True, text="fact"):
    return {
        "text": text,
        "relevant": relevant,
        "supported_by_citation": supported,
        "present_in_any_retrieved_doc": present,
    }


def facts(supported, incorrectly_cited, hallucinated, irrelevant=0):
    out = []
    out += [fact(True, True, text=f"supported-{i}") for i in range(supported)]
    out += [fact(False, True, text=f"inc-{i}") for i in range(incorrectly_cited)]
    out += [fact(False, False, text=f"hall-{i}") for i in range(hallucinated)]
    for i in range(irrelevant):
        out[i]["relevant"] = False
    return out


RECORDS = [
    # q01: everything perfect -> accuracy 1
    {"question_id": "q01", "cited_urls": urls(2, 2), "keywords": keywords(3, 3),
     "facts": facts(3, 0, 0), "subquestions": subquestions(1, 1)},
    # q02: correctness exactly 0.8 (4/5) passes; the unsupported fact is in-corpus
    {"question_id": "q02", "cited_urls": urls(1, 1), "keywords": keywords(2, 2),
     "facts": facts(4, 1, 0), "subquestions": subquestions(2, 2)},
    # q03: keyword relevance 79/100 = 0.79 fails the floor
    {"question_id": "q03", "cited_urls": urls(1, 1), "keywords": keywords(79, 100),
     "facts": facts(2, 0, 0), "subquestions": subquestions(1, 1)},
    # q04: exactly one hallucinated fact passes; correctness 4/5 = 0.8
    {"question_id": "q04", "cited_urls": urls(2, 2), "keywords": keywords(1, 1),
     "facts": facts(4, 0, 1), "subquestions": subquestions(1, 1)},
    # q05: two hallucinated facts fail even though correctness 8/10 = 0.8 passes
    {"question_id": "q05", "cited_urls": urls(1, 1), "keywords": keywords(2, 2),
     "facts": facts(8, 0, 2), "subquestions": subquestions(1, 1)},
    # q06: cited-URL relevance 3/4 = 0.75 fails
    {"question_id": "q06", "cited_urls": urls(3, 4), "keywords": keywords(1, 1),
     "facts": facts(1, 0, 0), "subquestions": subquestions(1, 1)},
    # q07: no cited URLs -> metric not applicable, reported 1.0, still passes
    {"question_id": "q07", "cited_urls": [], "keywords": keywords(1, 1),
     "facts": facts(1, 0, 0), "subquestions": subquestions(1, 1)},
    # q08: completeness 1/2 = 0.5 fails
    {"question_id": "q08", "cited_urls": urls(1, 1), "keywords": keywords(1, 1),
     "facts": facts(2, 0, 0), "subquestions": subquestions(1, 2)},
    # q09: correctness 7/10 = 0.7 fails; decomposition (2 incorrectly cited, 1 hallucinated)
    {"question_id": "q09", "cited_urls": urls(2, 2), "keywords": keywords(3, 3),
     "facts": facts(7, 2, 1, irrelevant=1), "subquestions": subquestions(1, 1)},
    # q10: every metric exactly at the 0.8 floor passes
    {"question_id": "q10", "cited_urls": urls(4, 5), "keywords": keywords(4, 5),
     "facts": facts(4, 1, 0, irrelevant=1), "subquestions": subquestions(4, 5)},
]


def main() -> None:
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        for record in RECORDS:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(RECORDS)} records to {OUT}")


if __name__ == "__main__":
    main()
