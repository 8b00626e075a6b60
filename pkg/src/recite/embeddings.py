"""Pluggable per-token contextual embedding providers.

Three implementations share one contract: a deterministic hash-based
provider (kind "test") so the whole suite runs offline, a file-backed
lookup provider (kind "file"), and an HTTP provider (kind "remote") for
real contextual models, including fine-tuned ones, which plug in as just
another endpoint. Every delivered vector is unit-norm; a content-addressed
on-disk cache avoids re-embedding the same documents for every point.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_NORM_TOLERANCE = 1e-6
CHUNK_OVERLAP_TOKENS = 64

_PROVIDER_KINDS = {"remote", "file", "test"}


class EmbeddingError(Exception):
    """Base class for provider failures."""


class EmbeddingConfigError(EmbeddingError):
    """Fatal misconfiguration, e.g. a dimension mismatch."""


class EmbeddingLookupError(EmbeddingError):
    """File provider has no entry for the requested text."""


class EmbeddingTransportError(EmbeddingError):
    """Remote call failed; carries retry metadata."""

    def __init__(self, message: str, attempts: int, retryable: bool = True):
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable


class BatchEmbeddingError(EmbeddingError):
    """Some batch indices failed; nothing is silently dropped."""

    def __init__(self, failures: Sequence[tuple[int, str]]):
        self.failures = list(failures)
        detail = "; ".join(f"[{i}] {msg}" for i, msg in self.failures)
        super().__init__(f"batch embedding failed for indices: {detail}")


@dataclass(frozen=True)
class EmbeddingProviderDescriptor:
    kind: str
    location: str
    dimension: int
    max_context_tokens: int = 512
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _PROVIDER_KINDS:
            raise EmbeddingConfigError(f"unknown provider kind {self.kind!r}")
        if self.dimension <= 0:
            raise EmbeddingConfigError("dimension must be positive")
        if self.max_context_tokens < 512:
            raise EmbeddingConfigError("max_context_tokens must be >= 512")

    @property
    def cache_id(self) -> str:
        return f"{self.kind}:{self.location}:{self.dimension}"


@dataclass(frozen=True, eq=False)
class TokenEmbeddingMatrix:
    """One unit-norm vector per provider token; rows align with tokens."""

    tokens: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if vectors.shape[0] != len(self.tokens):
            raise ValueError("row count must equal token count")
        if len(self.tokens):
            norms = np.linalg.norm(vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > _NORM_TOLERANCE):
                raise ValueError("every vector must have unit norm within 1e-6")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])


def _renormalize(vectors: np.ndarray) -> np.ndarray:
    """Force rows to unit norm when they drift beyond tolerance."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise EmbeddingError("received a zero or non-finite vector")
    if np.any(np.abs(norms - 1.0) > _NORM_TOLERANCE):
        return vectors / norms
    return vectors


class EmbeddingProvider(Protocol):
    descriptor: EmbeddingProviderDescriptor

    def embed_tokens(self, text: str) -> TokenEmbeddingMatrix: ...

    def batch_embed(self, texts: Sequence[str]) -> list[TokenEmbeddingMatrix]: ...


def _sequential_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> list[TokenEmbeddingMatrix]:
    results: list[TokenEmbeddingMatrix] = []
    failures: list[tuple[int, str]] = []
    for i, text in enumerate(texts):
        try:
            results.append(provider.embed_tokens(text))
        except Exception as exc:  # noqa: BLE001 - reported per index
            failures.append((i, str(exc)))
    if failures:
        raise BatchEmbeddingError(failures)
    return results


_HASH_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class HashEmbeddingProvider:
    """Deterministic offline provider (descriptor kind "test").

    Each token's vector is the unit-normalized draw of an RNG seeded from
    the token string and a window of neighboring tokens, which makes the
    embedding contextual (the same word in different surroundings gets a
    different vector) yet exactly reproducible. Texts longer than the
    context budget are embedded in overlapping chunks and concatenated;
    tokens near chunk edges see a truncated context window.
    """

    def __init__(self, dimension: int = 32, max_context_tokens: int = 512,
                 seed: int = 0, window: int = 2):
        self._seed = seed
        self._window = window
        self.descriptor = EmbeddingProviderDescriptor(
            kind="test",
            location=f"hash(seed={seed},window={window})",
            dimension=dimension,
            max_context_tokens=max_context_tokens,
            metadata={"layer": "n/a (hash provider)"},
        )

    def tokenize(self, text: str) -> list[str]:
        return _HASH_TOKEN_RE.findall(text)

    def _vector(self, token: str, left: Sequence[str], right: Sequence[str]) -> np.ndarray:
        key = "\x1f".join([str(self._seed), token, "|".join(left), "|".join(right)])
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vec = rng.standard_normal(self.descriptor.dimension)
        return vec / np.linalg.norm(vec)

    def _embed_window(self, tokens: Sequence[str]) -> np.ndarray:
        w = self._window
        rows = [
            self._vector(tok, tokens[max(0, i - w): i], tokens[i + 1: i + 1 + w])
            for i, tok in enumerate(tokens)
        ]
        return np.array(rows) if rows else np.zeros((0, self.descriptor.dimension))

    def embed_tokens(self, text: str) -> TokenEmbeddingMatrix:
        if not text:
            raise ValueError("text must be non-empty")
        tokens = self.tokenize(text)
        limit = self.descriptor.max_context_tokens
        if len(tokens) <= limit:
            return TokenEmbeddingMatrix(tuple(tokens), self._embed_window(tokens))
        step = limit - CHUNK_OVERLAP_TOKENS
        kept_tokens: list[str] = []
        kept_rows: list[np.ndarray] = []
        for chunk_index, start in enumerate(range(0, len(tokens), step)):
            chunk = tokens[start: start + limit]
            rows = self._embed_window(chunk)
            drop = 0 if chunk_index == 0 else CHUNK_OVERLAP_TOKENS
            kept_tokens.extend(chunk[drop:])
            kept_rows.append(rows[drop:])
            if start + limit >= len(tokens):
                break
        return TokenEmbeddingMatrix(tuple(kept_tokens), np.concatenate(kept_rows))

    def batch_embed(self, texts: Sequence[str]) -> list[TokenEmbeddingMatrix]:
        return _sequential_batch(self, texts)


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class FileEmbeddingProvider:
    """Lookup provider over a JSONL sidecar keyed by text hash.

    Each line is {"key": sha256(text), "tokens": [...], "vectors": [[...]]}.
    Stored unit vectors are returned bit-exactly; rows drifting beyond the
    norm tolerance are renormalized on receipt.
    """

    def __init__(self, path: str | Path, dimension: int | None = None,
                 max_context_tokens: int = 512):
        self._path = Path(path)
        self._entries: dict[str, tuple[tuple[str, ...], np.ndarray]] = {}
        dim = dimension
        with open(self._path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                vectors = np.array(record["vectors"], dtype=np.float64)
                if vectors.ndim == 1:
                    vectors = vectors.reshape(0, dim or 0)
                if dim is None and vectors.size:
                    dim = int(vectors.shape[1])
                elif vectors.size and vectors.shape[1] != dim:
                    raise EmbeddingConfigError(
                        f"{self._path}:{line_no}: dimension {vectors.shape[1]} != {dim}"
                    )
                self._entries[record["key"]] = (tuple(record["tokens"]), vectors)
        if dim is None:
            raise EmbeddingConfigError(f"{self._path}: no usable records")
        self.descriptor = EmbeddingProviderDescriptor(
            kind="file",
            location=str(self._path),
            dimension=dim,
            max_context_tokens=max_context_tokens,
        )

    def embed_tokens(self, text: str) -> TokenEmbeddingMatrix:
        if not text:
            raise ValueError("text must be non-empty")
        key = text_key(text)
        if key not in self._entries:
            raise EmbeddingLookupError(f"no embedding stored for text hash {key[:12]}…")
        tokens, vectors = self._entries[key]
        return TokenEmbeddingMatrix(tokens, _renormalize(vectors))

    def batch_embed(self, texts: Sequence[str]) -> list[TokenEmbeddingMatrix]:
        return _sequential_batch(self, texts)


def write_embedding_file(path: str | Path, texts: Sequence[str],
                         provider: EmbeddingProvider) -> None:
    """Build a file-provider sidecar by embedding texts with another provider."""
    with open(path, "w", encoding="utf-8") as fh:
        for text in texts:
            matrix = provider.embed_tokens(text)
            fh.write(json.dumps({
                "key": text_key(text),
                "tokens": list(matrix.tokens),
                "vectors": [list(map(float, row)) for row in matrix.vectors],
            }) + "\n")


class RemoteEmbeddingProvider:
    """HTTP provider: POST {"texts": [...]} -> {"dimension", "matrices"}.

    Retries transient transport failures and 5xx responses with backoff,
    then raises EmbeddingTransportError with the attempt count. A response
    dimension different from the descriptor is a fatal config error.
    """

    def __init__(self, endpoint: str, dimension: int, max_context_tokens: int = 512,
                 timeout_s: float = 30.0, max_retries: int = 3,
                 backoff_s: float = 0.5, client: Any = None):
        import httpx

        self._endpoint = endpoint
        self._timeout = timeout_s
        self._max_retries = max_retries
        self._backoff = backoff_s
        self._client = client or httpx.Client(timeout=timeout_s)
        self.descriptor = EmbeddingProviderDescriptor(
            kind="remote",
            location=endpoint,
            dimension=dimension,
            max_context_tokens=max_context_tokens,
        )

    def _post(self, payload: dict) -> dict:
        import httpx

        last_error = "no attempt made"
        for attempt in range(1, self._max_retries + 1):
            try:
                response = self._client.post(self._endpoint, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if response.status_code >= 500:
                    last_error = f"server error {response.status_code}"
                elif response.status_code >= 400:
                    raise EmbeddingTransportError(
                        f"request rejected ({response.status_code}): {response.text[:200]}",
                        attempts=attempt, retryable=False,
                    )
                else:
                    return response.json()
            if attempt < self._max_retries:
                time.sleep(self._backoff * attempt)
        raise EmbeddingTransportError(last_error, attempts=self._max_retries, retryable=True)

    def batch_embed(self, texts: Sequence[str]) -> list[TokenEmbeddingMatrix]:
        if not texts:
            return []
        data = self._post({"texts": list(texts)})
        if int(data.get("dimension", -1)) != self.descriptor.dimension:
            raise EmbeddingConfigError(
                f"provider returned dimension {data.get('dimension')}, "
                f"configured {self.descriptor.dimension}"
            )
        matrices = data.get("matrices", [])
        if len(matrices) != len(texts):
            missing = list(range(len(matrices), len(texts)))
            raise BatchEmbeddingError([(i, "no matrix in response") for i in missing])
        results: list[TokenEmbeddingMatrix] = []
        failures: list[tuple[int, str]] = []
        for i, entry in enumerate(matrices):
            try:
                vectors = np.array(entry["vectors"], dtype=np.float64)
                if vectors.ndim == 1:
                    vectors = vectors.reshape(0, self.descriptor.dimension)
                results.append(TokenEmbeddingMatrix(tuple(entry["tokens"]), _renormalize(vectors)))
            except Exception as exc:  # noqa: BLE001 - reported per index
                failures.append((i, str(exc)))
        if failures:
            raise BatchEmbeddingError(failures)
        return results

    def embed_tokens(self, text: str) -> TokenEmbeddingMatrix:
        if not text:
            raise ValueError("text must be non-empty")
        return self.batch_embed([text])[0]


class CachedEmbeddingProvider:
    """Content-addressed on-disk cache around any provider.

    Keyed by hash(provider id + text); repeated texts come back
    bit-identical without touching the inner provider. Writers take a
    per-key lock and publish atomically via rename.
    """

    def __init__(self, inner: EmbeddingProvider, cache_dir: str | Path):
        self._inner = inner
        self._dir = Path(cache_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self.descriptor = inner.descriptor
        self._locks: dict[str, threading.Lock] = {}
        self._locks_mutex = threading.Lock()

    def _key(self, text: str) -> str:
        raw = self.descriptor.cache_id.encode("utf-8") + b"\x00" + text.encode("utf-8")
        return hashlib.sha256(raw).hexdigest()

    def _lock_for(self, key: str) -> threading.Lock:
        with self._locks_mutex:
            return self._locks.setdefault(key, threading.Lock())

    def embed_tokens(self, text: str) -> TokenEmbeddingMatrix:
        key = self._key(text)
        path = self._dir / f"{key}.json"
        if path.exists():
            record = json.loads(path.read_text("utf-8"))
            return TokenEmbeddingMatrix(
                tuple(record["tokens"]), np.array(record["vectors"], dtype=np.float64).reshape(-1, self.descriptor.dimension)
            )
        matrix = self._inner.embed_tokens(text)
        with self._lock_for(key):
            if not path.exists():
                fd, tmp = tempfile.mkstemp(dir=self._dir, suffix=".tmp")
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump({
                        "tokens": list(matrix.tokens),
                        "vectors": [list(map(float, row)) for row in matrix.vectors],
                    }, fh)
                os.replace(tmp, path)
        return matrix

    def batch_embed(self, texts: Sequence[str]) -> list[TokenEmbeddingMatrix]:
        return _sequential_batch(self, texts)


def make_provider(descriptor: Mapping[str, Any], cache_dir: str | Path | None = None) -> EmbeddingProvider:
    """Build a provider from a descriptor dict (e.g. a parsed --embedder file)."""
    kind = descriptor.get("kind", "test")
    provider: EmbeddingProvider
    if kind == "test":
        provider = HashEmbeddingProvider(
            dimension=int(descriptor.get("dimension", 32)),
            max_context_tokens=int(descriptor.get("max_context_tokens", 512)),
            seed=int(descriptor.get("seed", 0)),
        )
    elif kind == "file":
        provider = FileEmbeddingProvider(
            descriptor["path"],
            dimension=descriptor.get("dimension"),
            max_context_tokens=int(descriptor.get("max_context_tokens", 512)),
        )
    elif kind == "remote":
        provider = RemoteEmbeddingProvider(
            descriptor["endpoint"],
            dimension=int(descriptor["dimension"]),
            max_context_tokens=int(descriptor.get("max_context_tokens", 512)),
            timeout_s=float(descriptor.get("timeout_s", 30.0)),
            max_retries=int(descriptor.get("max_retries", 3)),
        )
    else:
        raise EmbeddingConfigError(f"unknown provider kind {kind!r}")
    if cache_dir is not None:
        provider = CachedEmbeddingProvider(provider, cache_dir)
    return provider
