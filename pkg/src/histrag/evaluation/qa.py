"""Answer quality: faithfulness (claim support) and answer relevancy."""

from __future__ import annotations

import logging
import re
from typing import Callable, Protocol, Sequence

import numpy as np

from ..backends import LlmBackend
from ..errors import BackendError, UndefinedMetricError
from ..generation import Answer, EvidenceContext
from ..prompts import CLAIM_DECOMPOSITION, CLAIM_VERDICT, QUESTION_GENERATION, load_template, render
from ..retrieval import parse_variations
from .entities import FUNCTION_WORDS

log = logging.getLogger(__name__)

_WORD = re.compile(r"\w+")
_OPEN_QUOTES = "«“"
_CLOSE_QUOTES = "»”"
STOPWORDS = frozenset().union(
    *FUNCTION_WORDS.values(),
    "it he she they we i you not no il elle ils elles nous vous je ne pas plus a été ont être avoir "
    "has have had also également were which what who whom où comme mais donc".split(),
)

Embedder = Callable[[Sequence[str]], np.ndarray]


def split_sentences(text: str) -> list[str]:
    """Split after runs of . ! ? that are followed by whitespace or the end,
    never inside quotation marks."""
    out: list[str] = []
    buf: list[str] = []
    depth = 0
    straight_open = False
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        buf.append(ch)
        if ch == '"':
            straight_open = not straight_open
        elif ch in _OPEN_QUOTES:
            depth += 1
        elif ch in _CLOSE_QUOTES:
            depth = max(depth - 1, 0)
        elif ch in ".!?" and depth == 0 and not straight_open:
            while i + 1 < n and text[i + 1] in ".!?":
                i += 1
                buf.append(text[i])
            if i + 1 == n or text[i + 1].isspace():
                out.append("".join(buf).strip())
                buf = []
        i += 1
    tail = "".join(buf).strip()
    if tail:
        out.append(tail)
    return [s for s in out if s]


def content_words(text: str) -> list[str]:
    return [w for w in _WORD.findall(text.casefold()) if w not in STOPWORDS]


def _has_alpha_content(sentence: str) -> bool:
    return any(any(c.isalpha() for c in w) for w in content_words(sentence))


class Judge(Protocol):
    def claims(self, answer_text: str) -> list[str]: ...

    def supported(self, claim: str, context: str) -> bool: ...


class OfflineJudge:
    """Deterministic substitute: sentences are claims; a claim is supported when
    at least ``threshold`` of its content words occur in the context."""

    def __init__(self, threshold: float = 0.6):
        self.threshold = threshold

    def claims(self, answer_text: str) -> list[str]:
        return [s for s in split_sentences(answer_text) if _has_alpha_content(s)]

    def supported(self, claim: str, context: str) -> bool:
        words = content_words(claim)
        if not words:
            return False
        vocab = set(content_words(context))
        return sum(w in vocab for w in words) / len(words) >= self.threshold


class LlmJudge:
    def __init__(self, llm: LlmBackend, temperature: float = 0.0):
        self.llm = llm
        self.temperature = temperature

    def claims(self, answer_text: str) -> list[str]:
        reply = self.llm.complete(render(load_template(CLAIM_DECOMPOSITION), answer=answer_text), temperature=self.temperature)
        return parse_variations(reply, "", 10_000)

    def supported(self, claim: str, context: str) -> bool:
        reply = self.llm.complete(
            render(load_template(CLAIM_VERDICT), context_text=context, claim=claim), temperature=self.temperature
        )
        word = _WORD.findall(reply.casefold())
        return bool(word) and word[0] in ("yes", "oui")


def faithfulness(answer: Answer, ctx: EvidenceContext, judge: Judge | None = None) -> float:
    """Supported claims / extracted claims; abstained answers score 0.0."""
    if answer.abstained:
        return 0.0
    judge = judge or OfflineJudge()
    claims = judge.claims(answer.text)
    if not claims:
        raise UndefinedMetricError("no claims could be extracted from a non-abstained answer")
    return sum(judge.supported(c, ctx.rendered) for c in claims) / len(claims)


def generate_questions(answer_text: str, n: int, llm: LlmBackend | None, temperature: float = 0.7) -> list[str]:
    if llm is None:
        return [answer_text] * n
    prompt = render(load_template(QUESTION_GENERATION), answer=answer_text)
    return [llm.complete(prompt, temperature=temperature).strip() for _ in range(n)]


def answer_relevancy(
    answer: Answer,
    query: str,
    llm: LlmBackend | None,
    embedder: Embedder,
    n: int = 3,
) -> float | None:
    """Mean cosine between embeddings of ``n`` questions regenerated from the
    answer and the query embedding.

    With ``llm=None`` the answer text itself stands in for each generated
    question. Returns ``None`` when the question generator is unavailable.
    """
    if answer.abstained:
        return 0.0
    if n < 1:
        raise ValueError("n must be >= 1")
    try:
        questions = generate_questions(answer.text, n, llm)
    except BackendError as exc:
        log.warning("answer relevancy unavailable: %s", exc)
        return None
    questions = [q if q.strip() else answer.text for q in questions]
    mat = np.asarray(embedder([query, *questions]), dtype=np.float64)
    e_o, e_g = mat[0], mat[1:]
    cos = (e_g @ e_o) / (np.linalg.norm(e_g, axis=1) * np.linalg.norm(e_o))
    return float(np.mean(cos))
