"""Okapi BM25 over chunk texts."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np

from .index import RankedList, rank_scores

_EDGE_PUNCT = "\"'`.,;:!?()[]{}«»“”‘’<>-–—…/\\*"


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens with surrounding punctuation trimmed."""
    out = []
    for tok in text.lower().split():
        tok = tok.strip(_EDGE_PUNCT)
        if tok:
            out.append(tok)
    return out


class BM25Index:
    def __init__(self, ids: Sequence[str], texts: Sequence[str]):
        self.ids = list(ids)
        self.tf = [Counter(tokenize(t)) for t in texts]
        self.doc_len = np.array([sum(c.values()) for c in self.tf], dtype=np.float64)
        self.n_docs = len(self.ids)
        self.avgdl = float(self.doc_len.mean()) if self.n_docs else 0.0
        df: Counter = Counter()
        for c in self.tf:
            df.update(c.keys())
        self.df = dict(df)
        self.postings: dict[str, list[int]] = {}
        for i, c in enumerate(self.tf):
            for term in c:
                self.postings.setdefault(term, []).append(i)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def scores(self, query: str, k1: float = 1.2, b: float = 0.75) -> np.ndarray:
        """Per-document scores; NaN marks documents sharing no query term."""
        out = np.full(self.n_docs, np.nan)
        avgdl = self.avgdl or 1.0
        for term in dict.fromkeys(tokenize(query)):
            idf = self.idf(term)
            for i in self.postings.get(term, ()):
                tf = self.tf[i][term]
                norm = tf + k1 * (1.0 - b + b * self.doc_len[i] / avgdl)
                prev = 0.0 if np.isnan(out[i]) else out[i]
                out[i] = prev + idf * tf * (k1 + 1.0) / norm
        return out

    def search(self, query: str, k: int, *, k1: float = 1.2, b: float = 0.75, query_id: str = "q") -> RankedList:
        if k < 1:
            raise ValueError("k must be >= 1")
        s = self.scores(query, k1, b)
        hit = np.flatnonzero(~np.isnan(s))
        items = rank_scores([self.ids[i] for i in hit], s[hit], k)
        return RankedList(query_id, tuple(items), "lexical")
