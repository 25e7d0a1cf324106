import math

import numpy as np

from histrag.lexical import BM25Index, tokenize

DOCS = {
    "a#0": "The war began in April 1861.",
    "b#0": "La guerre de Sécession commence en 1861 ; la guerre dure quatre ans.",
    "c#0": "Slavery was the main cause of the war",
    "d#0": "A comet was observed over Paris",
    "e#0": "The war, the war, and again the war!",
}


def bm25_oracle(query, docs, k1=1.2, b=0.75):
    """Direct evaluation of the BM25 formula over hand-tokenized documents."""
    toks = {cid: [t.strip(".,;!?").lower() for t in text.split() if t.strip(".,;!?")] for cid, text in docs.items()}
    n = len(toks)
    avgdl = sum(len(t) for t in toks.values()) / n
    out = {}
    for cid, words in toks.items():
        total, hit = 0.0, False
        for term in dict.fromkeys(query.lower().split()):
            f = words.count(term)
            if f == 0:
                continue
            hit = True
            df = sum(term in w for w in toks.values())
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            total += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(words) / avgdl))
        if hit:
            out[cid] = total
    return out


def test_tokenize_trims_edge_punctuation():
    assert tokenize("« Bonjour, » le (monde)!") == ["bonjour", "le", "monde"]


def test_two_term_query_matches_oracle():
    idx = BM25Index(list(DOCS), list(DOCS.values()))
    want = bm25_oracle("war 1861", DOCS)
    got = idx.search("war 1861", 10)
    assert set(got.chunk_ids) == set(want)
    for cid, score in got.items:
        assert abs(score - want[cid]) <= 1e-9
    assert got.chunk_ids == sorted(want, key=lambda c: (-want[c], c))


def test_repeated_query_terms_count_once():
    idx = BM25Index(list(DOCS), list(DOCS.values()))
    assert np.allclose(idx.scores("war war"), idx.scores("war"), equal_nan=True)


def test_unique_term_ranks_first():
    idx = BM25Index(list(DOCS), list(DOCS.values()))
    assert idx.search("comet", 3).chunk_ids == ["d#0"]


def test_no_overlap_is_empty():
    idx = BM25Index(list(DOCS), list(DOCS.values()))
    assert len(idx.search("zeppelin", 5)) == 0
    assert len(idx.search("   ", 5)) == 0


def test_params_are_respected():
    idx = BM25Index(list(DOCS), list(DOCS.values()))
    want = bm25_oracle("guerre", DOCS, k1=2.0, b=0.3)
    (cid, score), = idx.search("guerre", 5, k1=2.0, b=0.3).items
    assert abs(score - want[cid]) <= 1e-9


def test_toy_index_lexical_source(toy_index):
    rl = toy_index.lexical.search("cinématographe", 5, query_id="q3")
    assert rl.source == "lexical" and rl.query_id == "q3"
    assert "lumiere#0" in rl.chunk_ids
