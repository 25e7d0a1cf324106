"""Dense-vs-fusion retrieval benchmark and QA quality evaluation."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..backends import LlmBackend
from ..embedding import ProviderConfig, embed_batch, embed_query
from ..errors import HistragError, UndefinedMetricError
from ..index import VectorIndex, search
from ..pipeline import Pipeline, context_of
from ..retrieval import RetrievalConfig, expand_query, rrf_fuse, gather_lists
from .entities import syntactic_relevance
from .latent import assign_clusters, cluster_metrics
from .qa import Judge, OfflineJudge, answer_relevancy, faithfulness
from .retrieval_metrics import Qrels, confidence_drop, recall_at_k, top5_rate

log = logging.getLogger(__name__)

CATEGORIES = ("fact", "entity", "interpretive", "absurd")


@dataclass(frozen=True)
class BenchQuery:
    query_id: str
    text: str
    lang: str = "en"
    category: str = "fact"


def read_queries(path: str | os.PathLike) -> list[BenchQuery]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            cat = obj.get("category", "fact")
            if cat not in CATEGORIES:
                raise ValueError(f"{path}: line {lineno}: unknown category {cat!r}")
            out.append(BenchQuery(str(obj["query_id"]), obj["text"], obj.get("lang", "en"), cat))
    return out


def _drop(items: Sequence[tuple[str, float]]) -> float | None:
    try:
        return confidence_drop(items)
    except UndefinedMetricError:
        return None


def _mean(xs: Sequence[float | None]) -> float | None:
    vals = [x for x in xs if x is not None]
    return sum(vals) / len(vals) if vals else None


def run_retrieval_benchmark(
    index: VectorIndex,
    queries: Sequence[BenchQuery],
    qrels: Qrels,
    cfg: RetrievalConfig,
    provider: ProviderConfig,
    llm: LlmBackend | None = None,
) -> dict[str, Any]:
    """Score each query with dense-only retrieval (original query) and with
    expansion + RRF fusion; returns aggregate and per-query rows."""
    missing = [q.query_id for q in queries if q.query_id not in qrels]
    if missing:
        raise ValueError(f"queries without qrels: {missing}")
    rows = []
    times = {"expand": 0.0, "dense": 0.0, "fusion": 0.0}
    for q in sorted(queries, key=lambda q: q.query_id):
        row: dict[str, Any] = {"query_id": q.query_id, "text": q.text, "category": q.category}
        try:
            t0 = time.perf_counter()
            qs = expand_query(q.text, cfg, llm, q.lang)
            t1 = time.perf_counter()
            dense = search(index, embed_query(q.text, provider), cfg.top_k_per_query, query_id="q0")
            t2 = time.perf_counter()
            fused = rrf_fuse(gather_lists(index, qs, cfg, provider), cfg.rrf_k)
            t3 = time.perf_counter()
        except HistragError as exc:
            log.error("benchmark query %s failed: %s", q.query_id, exc)
            row["error"] = str(exc)
            rows.append(row)
            continue
        times["expand"] += t1 - t0
        times["dense"] += t2 - t1
        times["fusion"] += t3 - t2
        rel = qrels[q.query_id]
        row.update(
            variations=list(qs.variations),
            degraded=qs.degraded,
            dense=[[cid, s] for cid, s in dense.items],
            fused=[[it.chunk_id, it.score] for it in fused.items[: cfg.top_k_per_query]],
            dense_rank={cid: dense.chunk_ids.index(cid) + 1 if cid in dense.chunk_ids else None for cid in sorted(rel)},
            fused_rank={cid: fused.rank_of(cid) for cid in sorted(rel)},
            drop_dense=_drop(dense.items),
            drop_fused=_drop([(it.chunk_id, it.score) for it in fused.items]),
            seconds={"expand": t1 - t0, "dense": t2 - t1, "fusion": t3 - t2},
        )
        rows.append(row)

    ok = [r for r in rows if "error" not in r and qrels[r["query_id"]]]
    dense_run = {r["query_id"]: [tuple(x) for x in r["dense"]] for r in ok}
    fused_run = {r["query_id"]: [tuple(x) for x in r["fused"]] for r in ok}
    summary: dict[str, Any] = {
        "provider_id": index.provider_id,
        "dim": index.dim,
        "queries": len(rows),
        "failed": len(rows) - len([r for r in rows if "error" not in r]),
        "rrf_k": cfg.rrf_k,
        "num_variations": cfg.num_variations,
        "lexical": cfg.enable_lexical,
        "seconds": times,
    }
    if ok:
        summary.update(
            recall_at_1_dense=recall_at_k(dense_run, qrels, 1),
            recall_at_5_dense=recall_at_k(dense_run, qrels, 5),
            top5_dense=top5_rate(dense_run, qrels),
            drop_dense=_mean([r["drop_dense"] for r in ok]),
            recall_at_1_fused=recall_at_k(fused_run, qrels, 1),
            recall_at_5_fused=recall_at_k(fused_run, qrels, 5),
            top5_fused=top5_rate(fused_run, qrels),
            drop_fused=_mean([r["drop_fused"] for r in ok]),
        )
    return {"summary": summary, "per_query": rows}


def provider_embedder(provider: ProviderConfig):
    def embed(texts: Sequence[str]) -> np.ndarray:
        return np.stack([e.vector for e in embed_batch(list(texts), provider, role="query")])

    return embed


def run_qa_evaluation(
    pipeline: Pipeline,
    questions: Sequence[BenchQuery],
    *,
    judge: Judge | None = None,
    question_llm: LlmBackend | None = None,
    n_questions: int = 3,
    threshold: float | None = None,
    qrels: Qrels | None = None,
) -> list[dict[str, Any]]:
    """Answer every question and score faithfulness / answer relevancy.

    With ``qrels``, each row also says whether the answer cites a relevant chunk
    (None for questions without judgments, such as absurd ones).
    """
    judge = judge or OfflineJudge()
    embedder = provider_embedder(pipeline.provider)
    threshold = threshold if threshold is not None else pipeline.generation.faithfulness_threshold
    rows = []
    for q in sorted(questions, key=lambda q: q.query_id):
        resp = pipeline.ask(q.text, q.lang)
        try:
            faith: float | None = faithfulness(resp.answer, context_of(resp), judge)
        except UndefinedMetricError as exc:
            log.warning("faithfulness undefined for %s: %s", q.query_id, exc)
            faith = None
        relevancy = answer_relevancy(resp.answer, q.text, question_llm, embedder, n_questions)
        rows.append(
            {
                "query_id": q.query_id,
                "category": q.category,
                "question": q.text,
                "answer": resp.answer.text,
                "abstained": resp.answer.abstained,
                "citations": list(resp.answer.citations),
                "faithfulness": faith,
                "answer_relevancy": relevancy,
                "below_threshold": None if threshold is None or faith is None else faith < threshold,
                "cites_relevant": bool(set(resp.answer.citations) & qrels[q.query_id])
                if qrels and qrels.get(q.query_id) else None,
            }
        )
    return rows


def latent_block(index: VectorIndex, k: int, seed: int = 0) -> dict[str, Any]:
    labels = assign_clusters(index.vectors, k, seed)
    m = cluster_metrics(index.vectors, labels, k)
    return {"k": k, "n": len(index), "seed": seed, **m.as_dict()}


def ner_block(entity_sets: Sequence[Sequence[Any]], seconds: float | None = None) -> dict[str, Any]:
    n_texts = len(entity_sets)
    n_ents = sum(len(s) for s in entity_sets)
    try:
        synrel: float | None = syntactic_relevance(entity_sets)
    except UndefinedMetricError:
        synrel = None
    return {
        "syntactic_relevance": synrel,
        "entities_per_text": n_ents / n_texts if n_texts else 0.0,
        "texts": n_texts,
        "timing_s": seconds,
    }


def index_entity_sets(index: VectorIndex) -> list[list[tuple[str, str]]]:
    return [[(e[0], e[1]) for e in m.get("entities", [])] for m in index.metadata]


def check_rates(report: Mapping[str, Any]) -> None:
    """Raise ValueError if any metric in a report dict is out of range."""
    def rate(name: str, v: Any) -> None:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")

    s = report.get("retrieval", {}).get("summary", {})
    for key in ("recall_at_1_dense", "recall_at_5_dense", "top5_dense", "recall_at_1_fused", "recall_at_5_fused", "top5_fused"):
        rate(key, s.get(key))
    for row in report.get("qa", []) or []:
        rate("faithfulness", row.get("faithfulness"))
        if row.get("answer_relevancy") is not None and not -1.0 <= row["answer_relevancy"] <= 1.0:
            raise ValueError("answer_relevancy outside [-1, 1]")
    lat = report.get("latent")
    if lat:
        if not -1.0 <= lat["silhouette"] <= 1.0:
            raise ValueError("silhouette outside [-1, 1]")
        if lat["davies_bouldin"] < 0 or lat["calinski_harabasz"] < 0 or math.isnan(lat["calinski_harabasz"]):
            raise ValueError("negative cluster index")
    ner = report.get("ner")
    if ner:
        rate("syntactic_relevance", ner.get("syntactic_relevance"))
