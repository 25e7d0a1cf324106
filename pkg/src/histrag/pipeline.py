"""End-to-end query path: expand, retrieve, fuse, structure, generate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .backends import LlmBackend
from .embedding import ProviderConfig
from .errors import ConfigError
from .generation import (
    Answer,
    EvidenceContext,
    GenerationConfig,
    build_answer_prompt,
    generate_answer,
    structure_context,
)
from .index import VectorIndex
from .retrieval import FusedResult, QuerySet, RetrievalConfig, expand_query, retrieve_hybrid


@dataclass(frozen=True)
class EvidenceEntry:
    doc_id: str
    title: str
    chunk_id: str
    fused_score: float
    fused_rank: int
    text: str


@dataclass(frozen=True)
class AskResponse:
    answer: Answer
    evidence: tuple[EvidenceEntry, ...]
    rendered_context: str
    variations: tuple[str, ...]
    degraded: bool
    timings: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer.to_dict(),
            "evidence": [vars(e).copy() for e in self.evidence],
            "rendered_context": self.rendered_context,
            "variations": list(self.variations),
            "degraded": self.degraded,
            "timings": dict(self.timings),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AskResponse":
        return cls(
            answer=Answer.from_dict(d["answer"]),
            evidence=tuple(EvidenceEntry(**e) for e in d["evidence"]),
            rendered_context=d["rendered_context"],
            variations=tuple(d["variations"]),
            degraded=bool(d["degraded"]),
            timings=dict(d["timings"]),
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AskResponse) and self.to_dict() == other.to_dict()


@dataclass
class Pipeline:
    index: VectorIndex
    provider: ProviderConfig
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    llm: LlmBackend | None = None

    def retrieve(self, query: str, lang: str = "en", *, expand: int | None = None, k: int | None = None,
                 timings: dict[str, float] | None = None) -> tuple[QuerySet, FusedResult]:
        cfg = self.retrieval
        if expand is not None or k is not None:
            cfg = replace(cfg, num_variations=cfg.num_variations if expand is None else expand,
                          final_k=cfg.final_k if k is None else k)
        timings = timings if timings is not None else {}
        t0 = time.perf_counter()
        qs = expand_query(query, cfg, self.llm, lang)
        timings["expand"] = time.perf_counter() - t0
        fused = retrieve_hybrid(self.index, qs, cfg, self.provider, timings)
        return qs, fused

    def ask(self, question: str, lang: str = "en", *, expand: int | None = None) -> AskResponse:
        if self.llm is None:
            raise ConfigError("answering needs an LLM backend: set LLM_API_BASE")
        timings: dict[str, float] = {}
        qs, fused = self.retrieve(question, lang, expand=expand, timings=timings)
        ctx = structure_context(fused, self.index)
        prompt = build_answer_prompt(ctx, question, self.generation.template)
        t0 = time.perf_counter()
        answer = generate_answer(prompt, self.generation, self.llm, query=question, lang=lang, citations=ctx.chunk_ids)
        timings["generate"] = time.perf_counter() - t0
        return AskResponse(
            answer=answer,
            evidence=evidence_entries(fused, self.index),
            rendered_context=ctx.rendered,
            variations=qs.variations,
            degraded=qs.degraded,
            timings={k: max(v, 0.0) for k, v in timings.items()},
        )


def evidence_entries(fused: FusedResult, index: VectorIndex) -> tuple[EvidenceEntry, ...]:
    out = []
    for rank, item in enumerate(fused.items, start=1):
        meta = index.meta(item.chunk_id)
        out.append(EvidenceEntry(meta.get("doc_id", ""), meta.get("title", ""), item.chunk_id, item.score, rank, meta.get("text", "")))
    return tuple(out)


def context_of(response: AskResponse) -> EvidenceContext:
    """Rebuild the evidence context shown to the generator (for judging)."""
    return EvidenceContext((), response.rendered_context)


def search_payload(qs: QuerySet, fused: FusedResult, index: VectorIndex, rrf_k: int) -> dict[str, Any]:
    """JSON-ready fused ranking with each item's contributing list ranks."""
    results = []
    for rank, item in enumerate(fused.items, start=1):
        meta = index.meta(item.chunk_id)
        results.append({
            "rank": rank,
            "chunk_id": item.chunk_id,
            "doc_id": meta.get("doc_id", ""),
            "title": meta.get("title", ""),
            "score": item.score,
            "contributing": [{"query_id": c.query_id, "source": c.source, "rank": c.rank} for c in item.contributing],
        })
    return {
        "query": qs.original,
        "rrf_k": rrf_k,
        "queries": dict(zip(qs.query_ids, qs.queries)),
        "degraded": qs.degraded,
        "results": results,
    }
