"""Flat (exhaustive) dense vector index with a bit-exact binary file format.

File layout, all integers little-endian::

    b"ARXI" | u16 version=1 | u16 dim | u64 count | u32 len + provider_id (UTF-8)
    count x ( u32 len + chunk_id (UTF-8) | dim x f32 )
    count x ( u32 len + metadata JSON (UTF-8) )
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from .corpus import Corpus
from .embedding import Embedding, ProviderConfig, embed_batch
from .errors import BackendError, DimensionMismatchError, IndexFormatError

MAGIC = b"ARXI"
VERSION = 1
_HEADER = struct.Struct("<HHQ")
_U32 = struct.Struct("<I")
META_FIELDS = ("doc_id", "title", "lang", "text")


@dataclass(frozen=True)
class RankedList:
    query_id: str
    items: tuple[tuple[str, float], ...]
    source: str = "dense"  # "dense" | "lexical"

    @property
    def chunk_ids(self) -> list[str]:
        return [cid for cid, _ in self.items]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.items]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True, eq=False)
class VectorIndex:
    provider_id: str
    dim: int
    chunk_ids: tuple[str, ...]
    vectors: np.ndarray  # (count, dim) float32, unit rows
    metadata: tuple[dict[str, Any], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.vectors.dtype != np.float32 or self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D float32 array")
        if self.vectors.shape != (len(self.chunk_ids), self.dim):
            raise ValueError("vectors shape does not match (count, dim)")
        if len(set(self.chunk_ids)) != len(self.chunk_ids):
            raise ValueError("chunk_ids must be unique")
        if self.metadata and len(self.metadata) != len(self.chunk_ids):
            raise ValueError("metadata must align with chunk_ids")
        self.vectors.setflags(write=False)

    def __len__(self) -> int:
        return len(self.chunk_ids)

    @cached_property
    def position(self) -> dict[str, int]:
        return {cid: i for i, cid in enumerate(self.chunk_ids)}

    def meta(self, chunk_id: str) -> dict[str, Any]:
        if not self.metadata:
            return {}
        return self.metadata[self.position[chunk_id]]

    @cached_property
    def lexical(self):
        from .lexical import BM25Index

        texts = [m.get("text", "") for m in self.metadata] if self.metadata else [""] * len(self)
        return BM25Index(self.chunk_ids, texts)


def _chunk_meta(chunk) -> dict[str, Any]:
    meta = {"doc_id": chunk.doc_id, "title": chunk.title, "lang": chunk.lang, "text": chunk.text}
    if chunk.entities:
        meta["entities"] = [[e.surface, e.label, e.start, e.end] for e in chunk.entities]
    return meta


def build_index(corpus: Corpus, provider: ProviderConfig) -> VectorIndex:
    if not corpus.chunks:
        raise ValueError("cannot index an empty corpus")
    rows: list[np.ndarray] = []
    step = max(provider.batch_size * provider.max_concurrent_requests, 1)
    texts = [c.text for c in corpus.chunks]
    for i in range(0, len(texts), step):
        try:
            embs = embed_batch(texts[i:i + step], provider, role="document")
        except BackendError as exc:
            raise BackendError(exc.component, f"{exc} ({len(rows)} of {len(texts)} chunks embedded)") from exc
        for e in embs:
            if e.dim != provider.dim:
                raise DimensionMismatchError(f"got dim {e.dim}, expected {provider.dim}")
            rows.append(e.vector)
    return VectorIndex(
        provider_id=provider.provider_id,
        dim=provider.dim,
        chunk_ids=tuple(c.chunk_id for c in corpus.chunks),
        vectors=np.stack(rows).astype(np.float32),
        metadata=tuple(_chunk_meta(c) for c in corpus.chunks),
    )


def rank_scores(ids: Sequence[str], scores: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Top-``k`` (id, score) by score descending, ties by ascending id."""
    n = len(ids)
    if n == 0:
        return []
    if k < n:
        kth = np.partition(scores, n - k)[n - k]
        cand = np.flatnonzero(scores >= kth)
    else:
        cand = np.arange(n)
    order = sorted(cand.tolist(), key=lambda i: (-scores[i], ids[i]))[:k]
    return [(ids[i], float(scores[i])) for i in order]


def search(index: VectorIndex, query_vec: Embedding | np.ndarray, k: int, query_id: str = "q") -> RankedList:
    """Exact top-``k`` by dot product (cosine on unit vectors)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    vec = query_vec.vector if isinstance(query_vec, Embedding) else np.asarray(query_vec)
    if vec.shape != (index.dim,):
        raise DimensionMismatchError(f"query dim {vec.shape[-1] if vec.ndim else 0} != index dim {index.dim}")
    q = vec.astype(np.float32).astype(np.float64)
    scores = index.vectors.astype(np.float64) @ q
    return RankedList(query_id, tuple(rank_scores(index.chunk_ids, scores, k)), "dense")


def _lp(data: bytes) -> bytes:
    return _U32.pack(len(data)) + data


def index_to_bytes(index: VectorIndex) -> bytes:
    parts = [MAGIC, _HEADER.pack(VERSION, index.dim, len(index)), _lp(index.provider_id.encode("utf-8"))]
    vec_le = index.vectors.astype("<f4", copy=False)
    for cid, row in zip(index.chunk_ids, vec_le):
        parts.append(_lp(cid.encode("utf-8")))
        parts.append(row.tobytes())
    metas = index.metadata or tuple({} for _ in index.chunk_ids)
    for m in metas:
        parts.append(_lp(json.dumps(m, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")))
    return b"".join(parts)


def save_index(index: VectorIndex, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(index_to_bytes(index))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.buf):
            raise IndexFormatError(
                f"truncated index file at byte offset {self.off}: need {n} bytes for {what}, {len(self.buf) - self.off} left"
            )
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out

    def lp(self, what: str) -> bytes:
        (n,) = _U32.unpack(self.take(4, f"{what} length"))
        return self.take(n, what)


def index_from_bytes(buf: bytes) -> VectorIndex:
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise IndexFormatError(f"not an index file: bad magic {magic!r} (expected {MAGIC!r})")
    version, dim, count = _HEADER.unpack(r.take(_HEADER.size, "header"))
    if version != VERSION:
        raise IndexFormatError(f"unsupported index version {version} (this build reads version {VERSION})")
    provider_id = r.lp("provider_id").decode("utf-8")
    ids: list[str] = []
    mat = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        ids.append(r.lp(f"chunk_id #{i}").decode("utf-8"))
        mat[i] = np.frombuffer(r.take(4 * dim, f"vector #{i}"), dtype="<f4")
    metas = []
    for i in range(count):
        metas.append(json.loads(r.lp(f"metadata #{i}").decode("utf-8")))
    if r.off != len(buf):
        raise IndexFormatError(f"unexpected trailing data at byte offset {r.off}")
    has_meta = any(metas)
    return VectorIndex(provider_id, dim, tuple(ids), mat, tuple(metas) if has_meta else ())


def load_index(path: str | os.PathLike) -> VectorIndex:
    with open(path, "rb") as fh:
        return index_from_bytes(fh.read())
