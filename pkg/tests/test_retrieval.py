import random
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histrag.backends import FailingLlm, ScriptedLlm, ScriptRule
from histrag.embedding import ProviderConfig, embed_query
from histrag.errors import ConfigError
from histrag.index import RankedList, search
from histrag.retrieval import (
    QuerySet,
    RetrievalConfig,
    expand_query,
    expansion_prompt,
    gather_lists,
    parse_variations,
    retrieve_hybrid,
    rrf_fuse,
)


class _Reply:
    model_name = "reply"

    def __init__(self, *replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt, *, temperature=0.3, max_tokens=512):
        self.prompts.append(prompt)
        return self.replies.pop(0) if len(self.replies) > 1 else self.replies[0]


def ranked(qid, ids, source="dense"):
    return RankedList(qid, tuple((cid, 1.0 - i / 100) for i, cid in enumerate(ids)), source)


def direct_rrf(lists, k):
    """score(d) = sum over lists of 1/(k + rank), ranks 1-based, computed naively."""
    scores = {}
    for rl in lists:
        for pos in range(len(rl.items)):
            cid = rl.items[pos][0]
            scores[cid] = scores.get(cid, 0.0) + 1.0 / (k + pos + 1)
    return scores


# -- expansion ----------------------------------------------------------------

def test_no_expansion_means_no_call():
    llm = _Reply("x")
    qs = expand_query("q?", RetrievalConfig(num_variations=0), llm)
    assert qs == QuerySet("q?", ()) and llm.prompts == []


def test_expansion_needs_llm():
    with pytest.raises(ConfigError, match="LLM_API_BASE"):
        expand_query("q?", RetrievalConfig(), None)


def test_five_lines_kept_in_order():
    lines = ["alpha", "beta", "gamma", "delta", "epsilon"]
    qs = expand_query("orig", RetrievalConfig(), _Reply("\n".join(lines)))
    assert qs.variations == tuple(lines) and not qs.degraded
    assert qs.queries[0] == "orig" and qs.query_ids == ("q0", "q1", "q2", "q3", "q4", "q5")


def test_seven_lines_with_duplicates_of_original():
    reply = "1. Who won?\n- Victor of the battle\nwho  WON?\n• The winning side\nWinner\nWho triumphed\nLast one"
    qs = expand_query("Who won?", RetrievalConfig(), _Reply(reply))
    # manual trace: 7 lines, 2 are the original modulo case/spacing/markers, 5 remain
    assert qs.variations == ("Victor of the battle", "The winning side", "Winner", "Who triumphed", "Last one")


def test_more_than_n_distinct_lines_truncated():
    qs = expand_query("q", RetrievalConfig(), _Reply("\n".join("abcdefg")))
    assert qs.variations == tuple("abcde")


def test_prompt_is_table_template():
    llm = _Reply("a")
    expand_query("Quand?", RetrievalConfig(num_variations=3), llm)
    assert llm.prompts == [expansion_prompt("Quand?", 3)]
    assert "in 3 different ways" in llm.prompts[0] and "Input: Quand?\n" in llm.prompts[0]


def test_empty_reply_retried_then_degraded():
    llm = _Reply("", "\n \n")
    qs = expand_query("q", RetrievalConfig(), llm)
    assert qs.degraded and qs.variations == () and len(llm.prompts) == 2


def test_retry_recovers():
    llm = _Reply("", "other phrasing")
    qs = expand_query("q", RetrievalConfig(), llm)
    assert qs.variations == ("other phrasing",) and not qs.degraded


def test_transport_failure_degrades():
    qs = expand_query("q", RetrievalConfig(), FailingLlm())
    assert qs.degraded and qs.variations == ()


def test_parse_drops_header_echo():
    assert parse_variations("Reformulations:\n1) one\n2) two", "x", 5) == ["one", "two"]


@settings(max_examples=200)
@given(st.lists(st.text(alphabet="abAB \t-1.", max_size=8), max_size=12), st.integers(0, 6))
def test_parse_invariants(lines, n):
    out = parse_variations("\n".join(lines), "ab", n)
    keys = [" ".join(v.casefold().split()) for v in out]
    assert len(out) <= n
    assert all(v.strip() for v in out)
    assert len(set(keys)) == len(keys) and "ab" not in keys


# -- fusion -------------------------------------------------------------------

def test_rrf_single_rank_one():
    fused = rrf_fuse([ranked("q0", ["a"])], 60)
    assert abs(fused.items[0].score - 1 / 61) <= 1e-12


def test_rrf_two_lists():
    fused = rrf_fuse([ranked("q0", ["a", "x", "y"]), ranked("q1", ["y", "z", "a"])], 60)
    item = fused.items[fused.rank_of("a") - 1]
    assert abs(item.score - (1 / 61 + 1 / 63)) <= 1e-12
    assert [(c.query_id, c.rank) for c in item.contributing] == [("q0", 1), ("q1", 3)]


def test_rrf_consensus_beats_single_top_rank():
    pad = [f"p{i}" for i in range(4)]
    lists = [ranked("q0", ["y"] + pad[:3] + ["x"])] + [ranked(f"q{i}", pad + ["x"]) for i in (1, 2)]
    fused = rrf_fuse(lists, 60)
    x, y = fused.items[fused.rank_of("x") - 1], fused.items[fused.rank_of("y") - 1]
    assert abs(x.score - 3 / 65) <= 1e-12 and abs(y.score - 1 / 61) <= 1e-12
    assert fused.rank_of("x") < fused.rank_of("y")


def test_rrf_rejects_bad_k_and_duplicates():
    with pytest.raises(ValueError):
        rrf_fuse([], 0)
    with pytest.raises(ValueError):
        rrf_fuse([ranked("q0", ["a", "a"])], 60)


def test_rrf_empty_inputs():
    assert len(rrf_fuse([], 60)) == 0
    assert len(rrf_fuse([ranked("q0", [])], 60)) == 0


def test_rrf_ties_by_chunk_id():
    fused = rrf_fuse([ranked("q0", ["b"]), ranked("q1", ["a"])], 60)
    assert fused.chunk_ids == ["a", "b"]


instances = st.lists(
    st.lists(st.sampled_from([f"d{i}" for i in range(10)]), unique=True, max_size=10), min_size=0, max_size=6
)


@settings(max_examples=300)
@given(instances, st.sampled_from([1, 10, 60]))
def test_rrf_matches_direct_summation(raw, k):
    lists = [ranked(f"q{i}", ids) for i, ids in enumerate(raw)]
    fused = rrf_fuse(lists, k)
    want = direct_rrf(lists, k)
    assert set(fused.chunk_ids) == set(want)
    for it in fused.items:
        assert abs(it.score - want[it.chunk_id]) <= 1e-12
        assert 0 < it.score <= len(lists) / (k + 1) + 1e-15
        assert all(c.rank >= 1 for c in it.contributing)
    assert all((a.score, b.chunk_id) >= (b.score, a.chunk_id) for a, b in zip(fused.items, fused.items[1:]))


@settings(max_examples=200)
@given(instances, st.sampled_from([1, 10, 60]), st.randoms())
def test_rrf_permutation_invariant(raw, k, rnd):
    lists = [ranked(f"q{i}", ids) for i, ids in enumerate(raw)]
    shuffled = lists[:]
    rnd.shuffle(shuffled)
    a, b = rrf_fuse(lists, k), rrf_fuse(shuffled, k)
    assert [(i.chunk_id, i.score) for i in a.items] == [(i.chunk_id, i.score) for i in b.items]


@settings(max_examples=100)
@given(st.lists(st.sampled_from("abcdefgh"), unique=True, min_size=1), st.integers(1, 100))
def test_rrf_single_list_preserves_order(ids, k):
    assert rrf_fuse([ranked("q0", ids)], k).chunk_ids == ids


@settings(max_examples=200)
@given(instances.filter(lambda r: any(len(ids) > 1 for ids in r)), st.data())
def test_rrf_monotone_in_rank(raw, data):
    i = data.draw(st.sampled_from([j for j, ids in enumerate(raw) if len(ids) > 1]))
    ids = list(raw[i])
    pos = data.draw(st.integers(1, len(ids) - 1))
    doc = ids[pos]
    better = ids[:]
    better[pos - 1], better[pos] = better[pos], better[pos - 1]
    before = rrf_fuse([ranked(f"q{j}", r) for j, r in enumerate(raw)], 60)
    after_raw = list(raw)
    after_raw[i] = better
    after = rrf_fuse([ranked(f"q{j}", r) for j, r in enumerate(after_raw)], 60)
    score = lambda f: f.items[f.rank_of(doc) - 1].score  # noqa: E731
    assert score(after) >= score(before)


def test_rrf_thousand_instances_fast():
    rng = random.Random(7)
    start = time.perf_counter()
    for _ in range(1000):
        k = rng.choice([1, 10, 60])
        lists = [ranked(f"q{j}", rng.sample([f"d{i}" for i in range(10)], rng.randint(0, 10)))
                 for j in range(rng.randint(1, 6))]
        want = direct_rrf(lists, k)
        for it in rrf_fuse(lists, k).items:
            assert abs(it.score - want[it.chunk_id]) <= 1e-12
    assert time.perf_counter() - start < 5.0


# -- hybrid retrieval -------------------------------------------------------------

def test_single_query_fusion_keeps_dense_order(toy_index, provider):
    cfg = RetrievalConfig(num_variations=0, final_k=20)
    q = "Who invented the cinematograph?"
    fused = retrieve_hybrid(toy_index, QuerySet(q), cfg, provider)
    dense = search(toy_index, embed_query(q, provider), 20)
    assert fused.chunk_ids == dense.chunk_ids


def test_variations_lift_target_to_first():
    dense = [ranked("q0", ["other", "target", "x"]), ranked("q1", ["target", "other"]), ranked("q2", ["target", "x"])]
    assert rrf_fuse(dense, 60).chunk_ids[0] == "target"


def test_hybrid_truncates_and_records_sources(toy_index, provider, mock_llm):
    cfg = RetrievalConfig(enable_lexical=True, final_k=5)
    qs = expand_query("Who invented the cinematograph?", cfg, mock_llm)
    fused = retrieve_hybrid(toy_index, qs, cfg, provider)
    assert len(fused) == 5
    assert {l.source for l in fused.lists} == {"dense", "lexical"}
    assert len(fused.lists) == 2 * len(qs.queries)
    assert "lumiere#0" in fused.chunk_ids


def test_provider_mismatch_refused(toy_index):
    with pytest.raises(ConfigError):
        gather_lists(toy_index, QuerySet("x"), RetrievalConfig(), ProviderConfig(dim=128))


def test_config_validation():
    with pytest.raises(ConfigError):
        RetrievalConfig(rrf_k=0)
    with pytest.raises(ConfigError):
        RetrievalConfig(num_variations=-1)
    with pytest.raises(ConfigError):
        RetrievalConfig(final_k=0)


def test_scripted_rules_require_context():
    llm = ScriptedLlm([ScriptRule(("Q:",), "answer", requires_context=("evidence",))], abstain="nope")
    assert llm.complete("Q: evidence") == "answer"
    assert llm.complete("Q: nothing") == "nope"
    assert llm.complete("unrelated") == ""
