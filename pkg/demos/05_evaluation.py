"""Dense vs. fused retrieval on the benchmark suite, plus answer quality."""

from histrag.backends import ScriptedLlm
from histrag.config import bundled_data
from histrag.corpus import load_corpus
from histrag.embedding import ProviderConfig
from histrag.evaluation import EvalReport, read_qrels, read_queries, run_qa_evaluation, run_retrieval_benchmark
from histrag.index import build_index
from histrag.pipeline import Pipeline
from histrag.retrieval import RetrievalConfig

provider = ProviderConfig(dim=256)
index = build_index(load_corpus(bundled_data("toy_corpus.jsonl")), provider)
llm = ScriptedLlm.from_file(bundled_data("mock_llm.json"))

queries = read_queries(bundled_data("bench_queries.jsonl"))
qrels = read_qrels(bundled_data("bench_qrels.txt"))
retrieval = run_retrieval_benchmark(index, queries, qrels, RetrievalConfig(), provider, llm)

questions = read_queries(bundled_data("qa_questions.jsonl"))
qa = run_qa_evaluation(Pipeline(index, provider, llm=llm), questions, qrels=read_qrels(bundled_data("qa_qrels.txt")))

report = EvalReport(retrieval=retrieval, qa=qa)
report.validate()
print(report.to_text())

for row in qa:
    print(row["query_id"], row["abstained"], row["faithfulness"], row["answer_relevancy"], row["cites_relevant"])
