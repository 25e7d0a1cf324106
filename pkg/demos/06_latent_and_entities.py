"""Cluster structure of the embedding space and entity coherence."""

import numpy as np

from histrag.backends import GazetteerEntityBackend
from histrag.config import bundled_data
from histrag.corpus import annotate_corpus, load_corpus
from histrag.embedding import ProviderConfig
from histrag.evaluation import assign_clusters, cluster_metrics, is_coherent, syntactic_relevance
from histrag.index import build_index

# two tight blobs: near-perfect silhouette
rng = np.random.default_rng(0)
blobs = np.vstack([[1, 0, 0] + rng.normal(scale=0.02, size=(30, 3)), [0, 1, 0] + rng.normal(scale=0.02, size=(30, 3))])
blobs /= np.linalg.norm(blobs, axis=1, keepdims=True)
print(cluster_metrics(blobs, assign_clusters(blobs, 2, seed=0)))

index = build_index(load_corpus(bundled_data("toy_corpus.jsonl")), ProviderConfig(dim=256))
for k in (2, 5, 8):
    labels = assign_clusters(index.vectors, k, seed=0)
    print(k, np.bincount(labels), cluster_metrics(index.vectors, labels, k))

examples = [("Walter Porzig", "PER"), ("##iste allemand Walter Porzig", "LABEL_0"), ("de Gaulle", "PER"), ("Paris,", "LOC")]
for e in examples:
    print(e, is_coherent(e))

corpus = annotate_corpus(load_corpus(bundled_data("toy_corpus.jsonl")), GazetteerEntityBackend.from_file(bundled_data("gazetteer.json")))
sets = [c.entities for c in corpus.chunks]
print(sum(map(len, sets)) / len(sets), syntactic_relevance(sets))
