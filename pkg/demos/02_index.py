"""Hash embeddings, exact top-k search and the on-disk index format."""

import tempfile
from pathlib import Path

import numpy as np

from histrag.config import bundled_data
from histrag.corpus import load_corpus
from histrag.embedding import ProviderConfig, embed_query, fallback_embed
from histrag.index import build_index, load_index, save_index, search

provider = ProviderConfig(dim=256)
print(provider.provider_id)

a = fallback_embed("la guerre de Sécession", 256).vector
b = fallback_embed("guerre de Sécession", 256).vector
c = fallback_embed("the Eiffel Tower", 256).vector
print(np.linalg.norm(a), a @ b, a @ c)  # unit norm; shared words give a higher cosine

index = build_index(load_corpus(bundled_data("toy_corpus.jsonl")), provider)
print(len(index), index.vectors.dtype, index.vectors.shape)

hits = search(index, embed_query("When was the Eiffel Tower inaugurated?", provider), 5)
for cid, score in hits.items:
    print(f"{score:.4f}  {cid}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "toy.idx"
    save_index(index, path)
    print(path.stat().st_size, "bytes", path.read_bytes()[:4])
    again = load_index(path)
    print(search(again, embed_query("Eiffel", provider), 5).items == search(index, embed_query("Eiffel", provider), 5).items)
