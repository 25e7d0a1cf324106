from .benchmark import (
    BenchQuery,
    latent_block,
    ner_block,
    read_queries,
    run_qa_evaluation,
    run_retrieval_benchmark,
)
from .entities import is_coherent, syntactic_relevance
from .latent import ClusterMetrics, assign_clusters, cluster_metrics
from .qa import LlmJudge, OfflineJudge, answer_relevancy, faithfulness, split_sentences
from .report import EvalReport
from .retrieval_metrics import (
    confidence_drop,
    mean_confidence_drop,
    read_qrels,
    read_run,
    recall_at_k,
    top5_rate,
    write_run,
)

__all__ = [
    "BenchQuery",
    "ClusterMetrics",
    "EvalReport",
    "LlmJudge",
    "OfflineJudge",
    "answer_relevancy",
    "assign_clusters",
    "cluster_metrics",
    "confidence_drop",
    "faithfulness",
    "is_coherent",
    "latent_block",
    "mean_confidence_drop",
    "ner_block",
    "read_qrels",
    "read_queries",
    "read_run",
    "recall_at_k",
    "run_qa_evaluation",
    "run_retrieval_benchmark",
    "split_sentences",
    "syntactic_relevance",
    "top5_rate",
    "write_run",
]
