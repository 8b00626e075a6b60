import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recite.domain import RetrievedDocument, ScoreMatrix
from recite.embeddings import TokenEmbeddingMatrix
from recite.scoring import (
    HybridConfig,
    HybridStats,
    ScoringContext,
    ScoringError,
    score_bertscore,
    score_hybrid,
    score_keyword,
    score_matrix,
)
from recite.segmenter import segment
from conftest import make_bundle


# --- keyword ----------------------------------------------------------------

def test_keyword_intersection():
    assert score_keyword(frozenset({"yield", "wheat", "crop"}),
                         frozenset({"yield", "wheat", "farm"})) == 2.0


def test_keyword_identity_and_disjoint():
    tokens = frozenset({"a", "b", "c", "d"})
    assert score_keyword(tokens, tokens) == 4.0
    assert score_keyword(tokens, frozenset({"x", "y"})) == 0.0


def test_keyword_empty_sets():
    assert score_keyword(frozenset(), frozenset({"a"})) == 0.0
    assert score_keyword(frozenset({"a"}), frozenset()) == 0.0


def test_keyword_multiset_overlap():
    a = Counter({"wheat": 2, "crop": 1})
    b = Counter({"wheat": 3, "crop": 1, "farm": 5})
    assert score_keyword(a, b) == 3.0


@given(st.sets(st.text(min_size=1, max_size=5), max_size=8),
       st.sets(st.text(min_size=1, max_size=5), max_size=8),
       st.text(min_size=1, max_size=5))
def test_keyword_monotonic_in_shared_tokens(point, doc, extra):
    before = score_keyword(frozenset(point), frozenset(doc))
    after = score_keyword(frozenset(point) | {extra}, frozenset(doc) | {extra})
    assert after >= before


# --- hybrid -----------------------------------------------------------------

def test_hybrid_arithmetic():
    # normalized keyword 0.5, normalized retrieval 1.0, weight 0.8 -> 0.6
    doc = RetrievedDocument(0, "d", "x", retrieval_score=1.0)
    stats = HybridStats(keyword_min=0.0, keyword_max=2.0, retrieval_min=0.0, retrieval_max=1.0)
    # keyword score 1 of max 2 -> 0.5
    value = score_hybrid(frozenset({"a"}), doc, frozenset({"a"}), stats)
    assert math.isclose(value, 0.6, abs_tol=1e-12)


def test_hybrid_degenerate_envelope_is_zero():
    doc = RetrievedDocument(0, "d", "x", retrieval_score=0.7)
    stats = HybridStats(keyword_min=3.0, keyword_max=3.0, retrieval_min=0.7, retrieval_max=0.7)
    assert score_hybrid(frozenset({"a"}), doc, frozenset({"a"}), stats) == 0.0


def test_hybrid_weight_range_enforced():
    with pytest.raises(ValueError):
        HybridConfig(keyword_weight=1.2)


def _rank(scores, retrieval):
    return sorted(range(len(scores)), key=lambda j: (-scores[j], -retrieval[j], j))


def _random_bundle(rng):
    vocab = [f"w{i}" for i in range(12)]
    doc_count = rng.randint(2, 6)
    texts = [" ".join(rng.choices(vocab, k=rng.randint(3, 10))) for _ in range(doc_count)]
    scores = [round(rng.uniform(0, 1), 3) for _ in range(doc_count)]
    if rng.random() < 0.3:  # force retrieval-score ties
        scores = [round(s, 1) for s in scores]
    answer = " ".join(rng.choices(vocab, k=5)) + " [1]."
    return make_bundle(answer, texts, scores=scores)


def test_hybrid_limit_laws_on_random_bundles():
    rng = random.Random(99)
    for _ in range(200):
        bundle = _random_bundle(rng)
        point = segment(bundle.answer, bundle.document_count)[0]
        retrieval = [d.retrieval_score for d in bundle.documents]

        ctx1 = ScoringContext(bundle.documents, hybrid_config=HybridConfig(keyword_weight=1.0))
        assert _rank(ctx1.hybrid_row(point), retrieval) == _rank(ctx1.keyword_row(point), retrieval)

        ctx0 = ScoringContext(bundle.documents, hybrid_config=HybridConfig(keyword_weight=0.0))
        assert _rank(ctx0.hybrid_row(point), retrieval) == _rank(retrieval, retrieval)


# --- bertscore --------------------------------------------------------------

def _unit_rows(rng, n, d):
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _matrix(rng, n, d=16):
    return TokenEmbeddingMatrix(tuple(f"t{i}" for i in range(n)), _unit_rows(rng, n, d))


def brute_force_greedy_mean(point, doc):
    """Independent oracle: explicit double loop over all token pairs."""
    maxima = []
    for row in point.vectors:
        best = -math.inf
        for other in doc.vectors:
            dot = sum(float(a) * float(b) for a, b in zip(row, other))
            best = max(best, dot)
        maxima.append(best)
    return sum(maxima) / len(maxima)


def test_bertscore_identity_is_one():
    rng = np.random.default_rng(1)
    matrix = _matrix(rng, 5)
    assert abs(score_bertscore(matrix, matrix) - 1.0) <= 1e-9


def test_bertscore_orthogonal_is_zero():
    point = TokenEmbeddingMatrix(("a", "b"), np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]))
    doc = TokenEmbeddingMatrix(("c", "d"), np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]]))
    assert score_bertscore(point, doc) == 0.0


def test_bertscore_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(100):
        point = _matrix(rng, int(rng.integers(1, 8)))
        doc = _matrix(rng, int(rng.integers(1, 12)))
        assert abs(score_bertscore(point, doc) - brute_force_greedy_mean(point, doc)) <= 1e-9


def test_bertscore_doc_token_permutation_invariance():
    rng = np.random.default_rng(7)
    point = _matrix(rng, 5)
    doc = _matrix(rng, 8)
    perm = rng.permutation(8)
    doc_permuted = TokenEmbeddingMatrix(
        tuple(doc.tokens[i] for i in perm), doc.vectors[perm]
    )
    assert score_bertscore(point, doc) == score_bertscore(point, doc_permuted)


def test_bertscore_not_symmetric():
    point = TokenEmbeddingMatrix(("a",), np.array([[1.0, 0.0]]))
    doc = TokenEmbeddingMatrix(("b", "c"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert score_bertscore(point, doc) == 1.0
    assert score_bertscore(doc, point) == 0.5


def test_bertscore_empty_document_scores_floor(caplog):
    rng = np.random.default_rng(3)
    point = _matrix(rng, 2, d=4)
    empty = TokenEmbeddingMatrix((), np.zeros((0, 4)))
    with caplog.at_level("WARNING"):
        assert score_bertscore(point, empty) == -1.0
    assert any("empty document" in r.getMessage() for r in caplog.records)


def test_bertscore_empty_point_rejected():
    empty = TokenEmbeddingMatrix((), np.zeros((0, 4)))
    with pytest.raises(ValueError):
        score_bertscore(empty, empty)


# --- score_matrix -----------------------------------------------------------

def test_matrix_keyword_hand_computed():
    # doc tokens (defaults): d0 {wheat, yield, rose}, d1 {match, rain, delayed}
    # point 1 "Wheat yield rose ." -> (3, 0); point 2 "Rain delayed match ." -> (0, 3)
    bundle = make_bundle(
        "Wheat yield rose [2]. Rain delayed match [1].",
        ["wheat yield rose", "match rain delayed"],
    )
    points = segment(bundle.answer, 2)
    matrix = score_matrix(bundle, points, "keyword")
    assert matrix == ScoreMatrix("keyword", ((3.0, 0.0), (0.0, 3.0)))


def test_matrix_empty_points():
    bundle = make_bundle("x", ["alpha"])
    matrix = score_matrix(bundle, [], "keyword")
    assert matrix.values == ()
    assert matrix.shape[0] == 0


def test_matrix_column_permutation_follows_documents():
    texts = ["wheat yield", "rain match", "drill mining"]
    bundle = make_bundle("Wheat and rain and drill [1].", texts)
    points = segment(bundle.answer, 3)
    base = score_matrix(bundle, points, "keyword").values
    permuted = score_matrix(
        make_bundle("Wheat and rain and drill [1].", [texts[2], texts[0], texts[1]]),
        points, "keyword",
    ).values
    assert [permuted[0][1], permuted[0][2], permuted[0][0]] == list(base[0])


def test_matrix_unknown_matcher():
    bundle = make_bundle("x [1].", ["alpha"])
    with pytest.raises(ScoringError):
        score_matrix(bundle, segment(bundle.answer, 1), "tfidf")


def test_scorers_are_pure():
    bundle = make_bundle("Wheat yield [2].", ["wheat yield", "rain"])
    points = segment(bundle.answer, 2)
    assert score_matrix(bundle, points, "hybrid") == score_matrix(bundle, points, "hybrid")
