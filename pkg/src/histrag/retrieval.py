"""Query expansion, lexical search and Reciprocal Rank Fusion."""

from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Sequence

from .backends import LlmBackend
from .embedding import ProviderConfig, embed_batch
from .errors import BackendError, ConfigError
from .index import RankedList, VectorIndex, search
from .prompts import QUERY_VARIATION, load_template, render

log = logging.getLogger(__name__)

_ENUM_MARKER = re.compile(r"^\s*(?:\(?\d+[.)]|[-•*–—])\s*")


@dataclass(frozen=True)
class RetrievalConfig:
    num_variations: int = 5
    rrf_k: int = 60
    top_k_per_query: int = 20
    final_k: int = 5
    enable_lexical: bool = False
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    expansion_template: str = QUERY_VARIATION
    expansion_temperature: float = 0.3

    def __post_init__(self) -> None:
        if self.rrf_k < 1:
            raise ConfigError("rrf_k must be >= 1")
        if self.num_variations < 0:
            raise ConfigError("num_variations must be >= 0")
        if self.final_k < 1 or self.top_k_per_query < 1:
            raise ConfigError("final_k and top_k_per_query must be >= 1")


@dataclass(frozen=True)
class QuerySet:
    original: str
    variations: tuple[str, ...] = ()
    lang: str = "en"
    degraded: bool = False

    @property
    def queries(self) -> tuple[str, ...]:
        return (self.original, *self.variations)

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(f"q{i}" for i in range(len(self.queries)))


@dataclass(frozen=True)
class Contribution:
    query_id: str
    source: str
    rank: int


@dataclass(frozen=True)
class FusedItem:
    chunk_id: str
    score: float
    contributing: tuple[Contribution, ...]


@dataclass(frozen=True)
class FusedResult:
    items: tuple[FusedItem, ...]
    lists: tuple[RankedList, ...] = field(default=(), compare=False)

    @property
    def chunk_ids(self) -> list[str]:
        return [it.chunk_id for it in self.items]

    @property
    def scores(self) -> list[float]:
        return [it.score for it in self.items]

    def rank_of(self, chunk_id: str) -> int | None:
        for r, it in enumerate(self.items, start=1):
            if it.chunk_id == chunk_id:
                return r
        return None

    def truncated(self, k: int) -> "FusedResult":
        return FusedResult(self.items[:k], self.lists)

    def __len__(self) -> int:
        return len(self.items)


def _dedupe_key(text: str) -> str:
    return " ".join(text.casefold().split())


def parse_variations(response: str, original: str, n: int) -> list[str]:
    """One reformulation per line; strip list markers, drop empties/duplicates/the original."""
    seen = {_dedupe_key(original)}
    out = []
    for line in response.splitlines():
        line = _ENUM_MARKER.sub("", line).strip()
        if not line or _dedupe_key(line) == "reformulations:":
            continue
        key = _dedupe_key(line)
        if key in seen:
            continue
        seen.add(key)
        out.append(line)
    return out[:n]


def expansion_prompt(q: str, n: int, template: str = QUERY_VARIATION) -> str:
    return render(load_template(template), num_variations=n, original_query=q)


def expand_query(q: str, cfg: RetrievalConfig, llm: LlmBackend | None, lang: str = "en") -> QuerySet:
    """Ask the LLM for ``cfg.num_variations`` reformulations of ``q``.

    An empty/unparseable reply is retried once; after that, or on a transport
    failure, the query proceeds alone with ``degraded=True``.
    """
    if not q.strip():
        raise ValueError("query must be non-empty")
    n = cfg.num_variations
    if n == 0:
        return QuerySet(q, (), lang)
    if llm is None:
        raise ConfigError("query expansion needs an LLM backend: set LLM_API_BASE or use --expand 0")
    prompt = expansion_prompt(q, n, cfg.expansion_template)
    for attempt in range(2):
        try:
            reply = llm.complete(prompt, temperature=cfg.expansion_temperature)
        except BackendError as exc:
            log.warning("query expansion failed, continuing with the original query only: %s", exc)
            return QuerySet(q, (), lang, degraded=True)
        variations = parse_variations(reply, q, n)
        if variations:
            return QuerySet(q, tuple(variations), lang)
        log.info("query expansion reply had no usable lines (attempt %d)", attempt + 1)
    return QuerySet(q, (), lang, degraded=True)


def lexical_search(index: VectorIndex, query: str, k: int, k1: float = 1.2, b: float = 0.75, query_id: str = "q") -> RankedList:
    return index.lexical.search(query, k, k1=k1, b=b, query_id=query_id)


def rrf_fuse(lists: Sequence[RankedList], k: int = 60) -> FusedResult:
    """Reciprocal Rank Fusion: score(d) = sum over lists containing d of 1 / (k + rank).

    Ranks are 1-based. Sums are exactly rounded (``math.fsum``) so the output
    does not depend on the order of ``lists``. Sorted by score descending,
    then chunk_id ascending.
    """
    if k < 1:
        raise ValueError("rrf k must be >= 1")
    terms: dict[str, list[float]] = {}
    contrib: dict[str, list[Contribution]] = {}
    for rl in lists:
        seen: set[str] = set()
        for rank, (cid, _score) in enumerate(rl.items, start=1):
            if cid in seen:
                raise ValueError(f"duplicate chunk_id {cid!r} in ranked list {rl.query_id}")
            seen.add(cid)
            terms.setdefault(cid, []).append(1.0 / (k + rank))
            contrib.setdefault(cid, []).append(Contribution(rl.query_id, rl.source, rank))
    scored = [(cid, math.fsum(ts)) for cid, ts in terms.items()]
    scored.sort(key=lambda t: (-t[1], t[0]))
    items = tuple(
        FusedItem(cid, s, tuple(sorted(contrib[cid], key=lambda c: (c.query_id, c.source, c.rank))))
        for cid, s in scored
    )
    return FusedResult(items, tuple(lists))


def gather_lists(
    index: VectorIndex,
    queryset: QuerySet,
    cfg: RetrievalConfig,
    provider: ProviderConfig,
) -> list[RankedList]:
    if provider.provider_id != index.provider_id:
        raise ConfigError(f"index was built with {index.provider_id!r}, query provider is {provider.provider_id!r}")
    embs = embed_batch(list(queryset.queries), provider, role="query")
    lists = []
    for qid, query, emb in zip(queryset.query_ids, queryset.queries, embs):
        lists.append(search(index, emb, cfg.top_k_per_query, query_id=qid))
        if cfg.enable_lexical:
            lists.append(lexical_search(index, query, cfg.top_k_per_query, cfg.bm25_k1, cfg.bm25_b, query_id=qid))
    return lists


def retrieve_hybrid(
    index: VectorIndex,
    queryset: QuerySet,
    cfg: RetrievalConfig,
    provider: ProviderConfig,
    timings: dict[str, float] | None = None,
    *,
    truncate: bool = True,
) -> FusedResult:
    t0 = time.perf_counter()
    lists = gather_lists(index, queryset, cfg, provider)
    t1 = time.perf_counter()
    fused = rrf_fuse(lists, cfg.rrf_k)
    t2 = time.perf_counter()
    if timings is not None:
        timings["search"] = timings.get("search", 0.0) + (t1 - t0)
        timings["fuse"] = timings.get("fuse", 0.0) + (t2 - t1)
    return fused.truncated(cfg.final_k) if truncate else fused
