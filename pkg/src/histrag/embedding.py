"""Embedding providers: remote HTTP models and a hashed n-gram fallback."""

from __future__ import annotations

import hashlib
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BackendError, ConfigError, DimensionMismatchError
from .transport import RetryPolicy, post_json

_WORD_RE = re.compile(r"\w+")


@dataclass(frozen=True, eq=False)
class Embedding:
    vector: np.ndarray
    provider_id: str

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "fallback"  # "fallback" | "remote"
    dim: int = 256
    model_name: str = "fallback-hash"
    base_url: str | None = None
    api_key: str | None = None
    batch_size: int = 32
    max_concurrent_requests: int = 4
    seed: int = 0
    query_prefix: str = ""
    doc_prefix: str = ""
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self) -> None:
        if self.kind not in ("fallback", "remote"):
            raise ConfigError(f"unknown embedding provider kind {self.kind!r}")
        if self.dim < 8:
            raise ConfigError("embedding dim must be >= 8")
        if self.batch_size < 1 or self.max_concurrent_requests < 1:
            raise ConfigError("batch_size and max_concurrent_requests must be >= 1")

    @property
    def provider_id(self) -> str:
        if self.kind == "fallback":
            return f"fallback-hash/dim={self.dim}/seed={self.seed}"
        return f"remote/{self.model_name}/dim={self.dim}"

    @classmethod
    def remote_from_env(cls, model_name: str, dim: int, **kwargs) -> "ProviderConfig":
        base = os.environ.get("EMBED_API_BASE")
        if not base:
            raise ConfigError("remote embedding provider needs EMBED_API_BASE")
        return cls(kind="remote", dim=dim, model_name=model_name, base_url=base.rstrip("/"),
                   api_key=os.environ.get("EMBED_API_KEY"), **kwargs)


def _features(text: str) -> list[str]:
    words = _WORD_RE.findall(text.lower())
    feats = [f"u:{w}" for w in words]
    feats.extend(f"b:{a} {b}" for a, b in zip(words, words[1:]))
    return feats


def _hash64(feature: str, seed: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little", signed=False)).digest()
    return int.from_bytes(digest, "little")


def fallback_embed(text: str, dim: int, seed: int = 0) -> Embedding:
    """Signed feature hashing of lowercased word unigrams and bigrams, L2-normalized.

    Returned in float64 so the unit norm holds to ~1e-15; text without any word
    maps to the first basis vector.
    """
    if dim < 8:
        raise ConfigError("embedding dim must be >= 8")
    acc = np.zeros(dim, dtype=np.float64)
    for feat in _features(text):
        h = _hash64(feat, seed)
        acc[h % dim] += 1.0 if (h // dim) & 1 == 0 else -1.0
    norm = np.linalg.norm(acc)
    if norm == 0.0:
        acc[0] = 1.0
    else:
        acc /= norm
    return Embedding(acc, ProviderConfig(kind="fallback", dim=dim, seed=seed).provider_id)


def _normalize_rows(mat: np.ndarray, component: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise BackendError(component, "provider returned a zero or non-finite vector")
    return (mat / norms).astype(np.float32)


def _remote_batch(texts: list[str], provider: ProviderConfig) -> np.ndarray:
    if not provider.base_url:
        raise ConfigError("remote embedding provider needs a base URL (EMBED_API_BASE)")
    body = post_json(
        f"{provider.base_url}/v1/embed",
        {"model": provider.model_name, "texts": texts},
        component="embedding",
        api_key=provider.api_key,
        policy=provider.retry,
    )
    vectors = body.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        raise BackendError("embedding", "response 'vectors' does not align with request texts")
    dim = body.get("dim")
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != provider.dim or (dim is not None and int(dim) != provider.dim):
        raise DimensionMismatchError(f"provider returned dim {dim if dim is not None else mat.shape[-1]}, config expects {provider.dim}")
    return mat


def embed_batch(texts: Sequence[str], provider: ProviderConfig, *, role: str = "document") -> list[Embedding]:
    """Embed ``texts`` in order; every output vector is float32 and unit-norm.

    ``role`` selects the provider's ``doc_prefix`` or ``query_prefix``.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    if any(not t.strip() for t in texts):
        raise ValueError("every text must be non-empty after trimming")
    prefix = provider.query_prefix if role == "query" else provider.doc_prefix
    inputs = [prefix + t for t in texts]

    if provider.kind == "fallback":
        mat = np.stack([fallback_embed(t, provider.dim, provider.seed).vector for t in inputs])
    else:
        batches = [inputs[i:i + provider.batch_size] for i in range(0, len(inputs), provider.batch_size)]
        with ThreadPoolExecutor(max_workers=provider.max_concurrent_requests) as pool:
            parts = list(pool.map(lambda b: _remote_batch(b, provider), batches))
        mat = np.concatenate(parts, axis=0)
    mat = _normalize_rows(mat, "embedding")
    pid = provider.provider_id
    return [Embedding(row, pid) for row in mat]


def embed_query(text: str, provider: ProviderConfig) -> Embedding:
    return embed_batch([text], provider, role="query")[0]
