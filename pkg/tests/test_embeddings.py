import json

import httpx
import numpy as np
import pytest

from recite.embeddings import (
    BatchEmbeddingError,
    CachedEmbeddingProvider,
    EmbeddingConfigError,
    EmbeddingLookupError,
    EmbeddingProviderDescriptor,
    EmbeddingTransportError,
    FileEmbeddingProvider,
    HashEmbeddingProvider,
    RemoteEmbeddingProvider,
    TokenEmbeddingMatrix,
    make_provider,
    write_embedding_file,
)


def test_descriptor_invariants():
    with pytest.raises(EmbeddingConfigError):
        EmbeddingProviderDescriptor(kind="test", location="", dimension=0)
    with pytest.raises(EmbeddingConfigError):
        EmbeddingProviderDescriptor(kind="test", location="", dimension=8, max_context_tokens=128)
    with pytest.raises(EmbeddingConfigError):
        EmbeddingProviderDescriptor(kind="magic", location="", dimension=8)


def test_matrix_enforces_unit_norm():
    with pytest.raises(ValueError):
        TokenEmbeddingMatrix(("a",), np.array([[2.0, 0.0]]))
    ok = TokenEmbeddingMatrix(("a",), np.array([[1.0, 0.0]]))
    assert ok.dimension == 2


def test_hash_provider_is_deterministic():
    provider = HashEmbeddingProvider(dimension=16)
    first = provider.embed_tokens("wheat crop yields rose")
    second = provider.embed_tokens("wheat crop yields rose")
    assert first.tokens == second.tokens
    assert np.array_equal(first.vectors, second.vectors)
    norms = np.linalg.norm(first.vectors, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-6)


def test_hash_provider_is_contextual():
    provider = HashEmbeddingProvider(dimension=16)
    in_context_a = provider.embed_tokens("the wheat crop")
    in_context_b = provider.embed_tokens("tall wheat shortage")
    row_a = in_context_a.vectors[list(in_context_a.tokens).index("wheat")]
    row_b = in_context_b.vectors[list(in_context_b.tokens).index("wheat")]
    assert not np.allclose(row_a, row_b)


def test_hash_provider_rejects_empty_text():
    with pytest.raises(ValueError):
        HashEmbeddingProvider().embed_tokens("")


def test_batch_matches_sequential():
    provider = HashEmbeddingProvider(dimension=8)
    texts = ["alpha beta", "gamma", "delta epsilon zeta"]
    batched = provider.batch_embed(texts)
    for text, matrix in zip(texts, batched):
        single = provider.embed_tokens(text)
        assert single.tokens == matrix.tokens
        assert np.array_equal(single.vectors, matrix.vectors)
    assert provider.batch_embed([]) == []


def test_batch_reports_failing_indices():
    provider = HashEmbeddingProvider(dimension=8)
    with pytest.raises(BatchEmbeddingError) as info:
        provider.batch_embed(["ok", "", "also ok", ""])
    assert [i for i, _ in info.value.failures] == [1, 3]


def test_chunking_preserves_token_count():
    provider = HashEmbeddingProvider(dimension=8)
    words = [f"w{i}" for i in range(1300)]
    matrix = provider.embed_tokens(" ".join(words))
    assert list(matrix.tokens) == words
    assert matrix.vectors.shape == (1300, 8)


def test_text_just_under_limit_is_single_shot():
    provider = HashEmbeddingProvider(dimension=8)
    words = [f"w{i}" for i in range(511)]
    text = " ".join(words)
    matrix = provider.embed_tokens(text)
    direct = provider._embed_window(words)
    assert np.array_equal(matrix.vectors, direct)


def test_file_provider_round_trips_bit_exactly(tmp_path):
    source = HashEmbeddingProvider(dimension=12)
    texts = ["wheat crop", "rain delay", "drill rig"]
    sidecar = tmp_path / "embeddings.jsonl"
    write_embedding_file(sidecar, texts, source)

    provider = FileEmbeddingProvider(sidecar)
    assert provider.descriptor.dimension == 12
    for text in texts:
        stored = provider.embed_tokens(text)
        original = source.embed_tokens(text)
        assert stored.tokens == original.tokens
        assert np.array_equal(stored.vectors, original.vectors)
    with pytest.raises(EmbeddingLookupError):
        provider.embed_tokens("never embedded")


def test_cache_returns_bit_identical_and_memoizes(tmp_path):
    calls = []

    class CountingProvider(HashEmbeddingProvider):
        def embed_tokens(self, text):
            calls.append(text)
            return super().embed_tokens(text)

    cached = CachedEmbeddingProvider(CountingProvider(dimension=8), tmp_path / "cache")
    first = cached.embed_tokens("wheat crop yields")
    second = cached.embed_tokens("wheat crop yields")
    assert calls == ["wheat crop yields"]
    assert first.tokens == second.tokens
    assert np.array_equal(first.vectors, second.vectors)


def _remote(handler, **kwargs):
    transport = httpx.MockTransport(handler)
    return RemoteEmbeddingProvider(
        "http://embedder.test/v1/embed", dimension=4,
        client=httpx.Client(transport=transport), backoff_s=0.0, **kwargs,
    )


def test_remote_provider_round_trip():
    def handler(request):
        payload = json.loads(request.content)
        matrices = [
            {"tokens": text.split(), "vectors": [[1.0, 0, 0, 0]] * len(text.split())}
            for text in payload["texts"]
        ]
        return httpx.Response(200, json={"dimension": 4, "matrices": matrices})

    provider = _remote(handler)
    result = provider.embed_tokens("alpha beta")
    assert result.tokens == ("alpha", "beta")
    assert result.vectors.shape == (2, 4)


def test_remote_provider_renormalizes_drifted_vectors():
    def handler(request):
        return httpx.Response(200, json={
            "dimension": 4,
            "matrices": [{"tokens": ["a"], "vectors": [[2.0, 0, 0, 0]]}],
        })

    matrix = _remote(handler).embed_tokens("a")
    assert np.allclose(matrix.vectors, [[1.0, 0, 0, 0]])


def test_remote_dimension_mismatch_is_fatal():
    def handler(request):
        return httpx.Response(200, json={"dimension": 8, "matrices": []})

    with pytest.raises(EmbeddingConfigError):
        _remote(handler).batch_embed(["x"])


def test_remote_transport_error_carries_retry_metadata():
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(503, text="overloaded")

    with pytest.raises(EmbeddingTransportError) as info:
        _remote(handler, max_retries=3).embed_tokens("x")
    assert info.value.attempts == 3
    assert info.value.retryable
    assert len(attempts) == 3


def test_remote_partial_response_reports_indices():
    def handler(request):
        return httpx.Response(200, json={
            "dimension": 4,
            "matrices": [{"tokens": ["a"], "vectors": [[1.0, 0, 0, 0]]}],
        })

    with pytest.raises(BatchEmbeddingError) as info:
        _remote(handler).batch_embed(["a b", "c d"])
    assert [i for i, _ in info.value.failures] == [1]


def test_make_provider_factory(tmp_path):
    provider = make_provider({"kind": "test", "dimension": 8}, cache_dir=tmp_path / "cache")
    assert provider.descriptor.kind == "test"
    matrix = provider.embed_tokens("hello world")
    assert matrix.dimension == 8
    with pytest.raises(EmbeddingConfigError):
        make_provider({"kind": "nope"})
