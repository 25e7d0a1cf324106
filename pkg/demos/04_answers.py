"""Grounded answers, evidence grouping and abstention."""

from histrag.backends import ScriptedLlm
from histrag.config import bundled_data
from histrag.corpus import load_corpus
from histrag.embedding import ProviderConfig
from histrag.index import build_index
from histrag.pipeline import Pipeline

provider = ProviderConfig(dim=256)
index = build_index(load_corpus(bundled_data("toy_corpus.jsonl")), provider)
pipe = Pipeline(index, provider, llm=ScriptedLlm.from_file(bundled_data("mock_llm.json")))

resp = pipe.ask("Qui est Antoine Meillet?", "fr")
print(resp.answer.abstained, resp.answer.text)
print(resp.answer.citations[:3])
print(resp.rendered_context[:400])
print({k: round(v, 5) for k, v in resp.timings.items()})

absurd = "Expliquez en détail comment les voyages interstellaires des Romains ont influencé l'architecture des temples égyptiens."
resp = pipe.ask(absurd, "fr")
print(resp.answer.abstained, resp.answer.text)
print(resp.answer.raw_text)

# answering without an LLM is a configuration error, not a silent fallback
try:
    Pipeline(index, provider).ask("Qui est Antoine Meillet?")
except Exception as exc:
    print(type(exc).__name__, exc)
