"""Cleaning, chunking and entity annotation of the bundled toy corpus."""

from collections import Counter

from histrag.backends import GazetteerEntityBackend
from histrag.config import bundled_data
from histrag.corpus import RawDocument, annotate_corpus, chunk_document, load_corpus, preprocess_text

# OCR-style noise: markup, entities, broken whitespace
raw = "<p>La  guerre&nbsp;de Sécession\n\ncommence en <b>1861</b>.</p>"
print(repr(preprocess_text(raw)))
print(preprocess_text(preprocess_text(raw)) == preprocess_text(raw))  # idempotent

# a long document becomes overlapping windows
doc = RawDocument("long", "Long", " ".join(f"w{i}" for i in range(1200)), "en")
for c in chunk_document(doc, max_tokens=512, overlap=64):
    words = c.text.split()
    print(c.chunk_id, c.token_count, words[0], "...", words[-1])

corpus = load_corpus(bundled_data("toy_corpus.jsonl"))
print(corpus.manifest)

stats = Counter()
ner = GazetteerEntityBackend.from_file(bundled_data("gazetteer.json"))
corpus = annotate_corpus(corpus, ner, stats=stats)
print(dict(stats))
for chunk in corpus.chunks[:3]:
    print(chunk.chunk_id, [(e.surface, e.label) for e in chunk.entities])
