"""Evidence structuring, grounded answer prompting and abstention detection."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

from .backends import LlmBackend
from .errors import ConfigError
from .index import VectorIndex
from .prompts import HISTORICAL_QA, load_template, render
from .retrieval import FusedResult

SEPARATOR = "\n\n---\n\n"
ABSTENTION_EN = "I cannot answer this question based solely on the provided information."
ABSTENTION_FR = "Je ne peux pas répondre à cette question sur la seule base des informations fournies."

DEFAULT_ABSTENTION_PHRASES: dict[str, tuple[str, ...]] = {
    "en": (ABSTENTION_EN,),
    "fr": (ABSTENTION_FR,),
}


@dataclass(frozen=True)
class EvidenceGroup:
    doc_id: str
    title: str
    passages: tuple[tuple[str, str], ...]  # (chunk_id, text) in fused-rank order

    def render(self) -> str:
        header = f"[Article: {self.title} | Document: {self.doc_id}]"
        return header + "\n" + "\n\n".join(text for _, text in self.passages)


@dataclass(frozen=True)
class EvidenceContext:
    groups: tuple[EvidenceGroup, ...]
    rendered: str

    @property
    def chunk_ids(self) -> tuple[str, ...]:
        return tuple(cid for g in self.groups for cid, _ in g.passages)


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.3
    max_output_tokens: int = 512
    abstention_phrases: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_ABSTENTION_PHRASES))
    faithfulness_threshold: float | None = None
    template: str = HISTORICAL_QA

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        t = self.faithfulness_threshold
        if t is not None and not 0.0 <= t <= 1.0:
            raise ConfigError("faithfulness_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class Answer:
    text: str
    abstained: bool
    citations: tuple[str, ...]
    query: str
    lang: str
    model: str
    temperature: float
    raw_text: str = ""
    empty_completion: bool = False

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["citations"] = list(self.citations)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Answer":
        d = dict(d)
        d["citations"] = tuple(d.get("citations", ()))
        return cls(**d)


def structure_context(fused: FusedResult, index: VectorIndex) -> EvidenceContext:
    """Group retrieved chunks by source document and render them with headers.

    Groups are ordered by the best fused rank of any member, passages inside
    a group by fused rank, and groups are joined with ``SEPARATOR``.
    """
    order: list[str] = []
    members: dict[str, list[str]] = {}
    for item in fused.items:
        meta = index.meta(item.chunk_id)
        doc_id = meta.get("doc_id") or item.chunk_id.rsplit("#", 1)[0]
        if doc_id not in members:
            order.append(doc_id)
            members[doc_id] = []
        members[doc_id].append(item.chunk_id)
    groups = []
    for doc_id in order:
        cids = members[doc_id]
        first = index.meta(cids[0])
        groups.append(
            EvidenceGroup(doc_id, first.get("title", ""), tuple((c, index.meta(c).get("text", "")) for c in cids))
        )
    return EvidenceContext(tuple(groups), SEPARATOR.join(g.render() for g in groups))


def build_answer_prompt(ctx: EvidenceContext, query: str, template: str = HISTORICAL_QA) -> str:
    if not query.strip():
        raise ValueError("query must be non-empty")
    return render(load_template(template), context_text=ctx.rendered, query=query)


def _normalize(text: str) -> str:
    text = unicodedata.normalize("NFC", text).casefold()
    text = re.sub(r"[^\w\s]|_", " ", text)
    return " ".join(text.split())


def matched_abstention(text: str, lang: str, cfg: GenerationConfig = GenerationConfig()) -> str | None:
    """Return the configured phrase found in ``text`` (normalized substring), if any."""
    norm = _normalize(text)
    if not norm:
        return None
    phrases = list(cfg.abstention_phrases.get(lang, ()))
    if lang != "en":
        phrases.extend(cfg.abstention_phrases.get("en", ()))
    for phrase in phrases:
        p = _normalize(phrase)
        if p and p in norm:
            return phrase
    return None


def detect_abstention(text: str, lang: str, cfg: GenerationConfig = GenerationConfig()) -> bool:
    return matched_abstention(text, lang, cfg) is not None


def default_abstention(lang: str, cfg: GenerationConfig = GenerationConfig()) -> str:
    phrases = cfg.abstention_phrases.get(lang) or cfg.abstention_phrases.get("en") or (ABSTENTION_EN,)
    return phrases[0]


def generate_answer(
    prompt: str,
    cfg: GenerationConfig,
    llm: LlmBackend,
    *,
    query: str = "",
    lang: str = "en",
    citations: tuple[str, ...] = (),
) -> Answer:
    """One completion at ``cfg.temperature``; transport errors propagate.

    Abstained answers carry the canonical phrase as ``text`` and keep the
    model's wording in ``raw_text``. An empty completion counts as abstention.
    """
    raw = llm.complete(prompt, temperature=cfg.temperature, max_tokens=cfg.max_output_tokens).strip()
    model = getattr(llm, "model_name", "unknown")
    phrase = matched_abstention(raw, lang, cfg)
    empty = not raw
    if empty:
        phrase = default_abstention(lang, cfg)
    abstained = phrase is not None
    return Answer(
        text=phrase if abstained else raw,
        abstained=abstained,
        citations=tuple(citations),
        query=query,
        lang=lang,
        model=model,
        temperature=cfg.temperature,
        raw_text=raw,
        empty_completion=empty,
    )
