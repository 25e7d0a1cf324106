"""Set-based retrieval metrics and TREC qrels/run file I/O."""

from __future__ import annotations

import logging
import os
from typing import Iterable, Mapping, Sequence

from ..errors import UndefinedMetricError
from ..index import RankedList

log = logging.getLogger(__name__)

Qrels = Mapping[str, frozenset]
RunResult = Mapping[str, Sequence[tuple[str, float]]]


def _evaluable(run: RunResult, qrels: Qrels) -> list[str]:
    qids = []
    for qid in sorted(run):
        if qid not in qrels:
            raise KeyError(f"query {qid!r} has no relevance judgments")
        if not qrels[qid]:
            log.warning("query %s has no relevant documents; excluded", qid)
            continue
        qids.append(qid)
    if not qids:
        raise UndefinedMetricError("no query with at least one relevant document")
    return qids


def _top_ids(items: Sequence[tuple[str, float]], k: int) -> set[str]:
    return {cid for cid, _ in items[:k]}


def recall_at_k(run: RunResult, qrels: Qrels, k: int) -> float:
    """Mean over queries of |relevant ∩ top-k| / |relevant|."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qids = _evaluable(run, qrels)
    return sum(len(set(qrels[q]) & _top_ids(run[q], k)) / len(qrels[q]) for q in qids) / len(qids)


def top5_rate(run: RunResult, qrels: Qrels) -> float:
    """Mean over queries of |relevant ∩ top-5| / 5; the denominator stays 5 for short lists."""
    qids = _evaluable(run, qrels)
    return sum(len(set(qrels[q]) & _top_ids(run[q], 5)) / 5 for q in qids) / len(qids)


def confidence_drop(ranked: RankedList | Sequence[tuple[str, float]]) -> float:
    items = ranked.items if isinstance(ranked, RankedList) else ranked
    if len(items) < 2:
        raise UndefinedMetricError("confidence drop needs at least two ranked items")
    return float(items[0][1]) - float(items[1][1])


def mean_confidence_drop(lists: Iterable[RankedList | Sequence[tuple[str, float]]]) -> float:
    drops = [confidence_drop(rl) for rl in lists if len(rl.items if isinstance(rl, RankedList) else rl) >= 2]
    if not drops:
        raise UndefinedMetricError("no list with at least two items")
    return sum(drops) / len(drops)


def read_qrels(path: str | os.PathLike) -> dict[str, frozenset]:
    """TREC qrels: ``query_id 0 chunk_id relevance`` per line."""
    rel: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[3] not in ("0", "1"):
                raise ValueError(f"{path}: line {lineno}: expected 'query_id 0 chunk_id {{0,1}}'")
            qid, _, cid, grade = parts
            bucket = rel.setdefault(qid, set())
            if grade == "1":
                bucket.add(cid)
    return {q: frozenset(s) for q, s in rel.items()}


def write_run(run: RunResult, path: str | os.PathLike, tag: str = "histrag") -> None:
    """TREC run: ``query_id Q0 chunk_id rank score tag``."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run):
            for rank, (cid, score) in enumerate(run[qid], start=1):
                fh.write(f"{qid} Q0 {cid} {rank} {score!r} {tag}\n")


def read_run(path: str | os.PathLike) -> dict[str, list[tuple[str, float]]]:
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValueError(f"{path}: line {lineno}: expected 6 fields")
            qid, _, cid, rank, score, _tag = parts
            rows.setdefault(qid, []).append((int(rank), cid, float(score)))
    return {q: [(cid, s) for _, cid, s in sorted(r)] for q, r in rows.items()}
