import random

import pytest

from recite.domain import Query, RagBundle, RetrievedDocument

FIXTURE_DIR = __file__.rsplit("/", 1)[0] + "/fixtures"


def make_docs(texts, scores=None, urls=None):
    out = []
    for i, text in enumerate(texts):
        out.append(
            RetrievedDocument(
                index=i,
                id=f"doc-{i}",
                text=text,
                retrieval_score=scores[i] if scores else 1.0 - i * 0.1,
                url=urls[i] if urls else f"https://example.com/{i}",
            )
        )
    return tuple(out)


def make_bundle(answer, doc_texts, query="What happened?", scores=None):
    return RagBundle(
        query=Query(query),
        documents=make_docs(doc_texts, scores),
        answer=answer,
    )


def random_chunking(rng: random.Random, text: str) -> list[str]:
    """Partition text into 1..n random contiguous chunks."""
    if not text:
        return []
    cuts = sorted(rng.sample(range(1, len(text)), min(rng.randint(0, 6), len(text) - 1)))
    chunks = []
    prev = 0
    for cut in cuts + [len(text)]:
        chunks.append(text[prev:cut])
        prev = cut
    return chunks


class AnswerBuilder:
    """Generates answers with a known point/marker structure.

    Serves as the independent oracle for segmentation tests: the expected
    citation sets and point count are known by construction, not derived
    from the code under test.
    """

    VOCAB = ["wheat", "yield", "crop", "drill", "farm", "rain", "match", "tall", "fast", "umpire"]
    TAILS = [".", "!", "?", ". ", ".\n", "", ", ", "; "]

    def __init__(self, rng: random.Random, doc_count: int):
        self.rng = rng
        self.doc_count = doc_count

    def prose(self) -> str:
        words = [self.rng.choice(self.VOCAB) for _ in range(self.rng.randint(1, 6))]
        return " ".join(words)

    def marker(self, numbers) -> str:
        sep = self.rng.choice([",", ", ", " , "])
        inner = sep.join(str(n) for n in numbers)
        pad = self.rng.choice(["", " ", ""])
        return f"[{pad}{inner}{pad}]"

    def build(self):
        """Returns (answer, expected_citation_sets, trailing_uncited)."""
        rng = self.rng
        parts = []
        expected = []
        for _ in range(rng.randint(1, 6)):
            parts.append(self.prose() + " ")
            numbers = rng.sample(range(1, self.doc_count + 1), rng.randint(1, min(3, self.doc_count)))
            run = [numbers]
            # sometimes split the citation set into adjacent markers
            if len(numbers) > 1 and rng.random() < 0.3:
                run = [[numbers[0]], numbers[1:]]
            glue = rng.choice(["", " "])
            parts.append(glue.join(self.marker(chunk) for chunk in run))
            parts.append(rng.choice(self.TAILS))
            expected.append(sorted(n - 1 for n in numbers))
        trailing = rng.random() < 0.4
        if trailing:
            parts.append(self.prose())
        return "".join(parts), expected, trailing


@pytest.fixture
def rng():
    return random.Random(20240811)
