"""Query expansion with a scripted LLM and reciprocal rank fusion."""

from histrag.backends import ScriptedLlm
from histrag.config import bundled_data
from histrag.corpus import load_corpus
from histrag.embedding import ProviderConfig, embed_query
from histrag.index import RankedList, build_index, search
from histrag.retrieval import RetrievalConfig, expand_query, retrieve_hybrid, rrf_fuse

# a document at rank 5 in three lists beats one at rank 1 in a single list
pad = ["p1", "p2", "p3", "p4"]
lists = [
    RankedList("q0", tuple((d, 0.0) for d in ["y", "p1", "p2", "p3", "x"])),
    RankedList("q1", tuple((d, 0.0) for d in pad + ["x"])),
    RankedList("q2", tuple((d, 0.0) for d in pad + ["x"])),
]
for item in rrf_fuse(lists, 60).items[:6]:
    print(f"{item.score:.5f}  {item.chunk_id}  {[(c.query_id, c.rank) for c in item.contributing]}")
print(3 / 65, 1 / 61)

provider = ProviderConfig(dim=256)
index = build_index(load_corpus(bundled_data("toy_corpus.jsonl")), provider)
llm = ScriptedLlm.from_file(bundled_data("mock_llm.json"))

question = "Who invented the cinematograph?"
dense = search(index, embed_query(question, provider), 10)
print("dense rank of lumiere#0:", dense.chunk_ids.index("lumiere#0") + 1 if "lumiere#0" in dense.chunk_ids else None)

cfg = RetrievalConfig(num_variations=5, final_k=10)
qs = expand_query(question, cfg, llm)
for qid, text in zip(qs.query_ids, qs.queries):
    print(qid, text)

fused = retrieve_hybrid(index, qs, cfg, provider)
print("fused rank of lumiere#0:", fused.rank_of("lumiere#0"))
for item in fused.items[:5]:
    print(f"{item.score:.5f}  {item.chunk_id}")

# BM25 lists join the fusion when enabled
hybrid = retrieve_hybrid(index, qs, RetrievalConfig(enable_lexical=True, final_k=5), provider)
print(sorted({rl.source for rl in hybrid.lists}), hybrid.chunk_ids)
