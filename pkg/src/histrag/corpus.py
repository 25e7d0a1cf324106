"""Corpus ingestion: cleaning, chunking and entity annotation."""

from __future__ import annotations

import html
import json
import logging
import os
import re
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

from .errors import AnnotationError, BackendError, CorpusFormatError

log = logging.getLogger(__name__)

CORE_LABELS = frozenset({"PER", "ORG", "LOC", "MISC"})

_TAG_RE = re.compile(r"<[^<>]*>")
_WS_RE = re.compile(r"\s+")
_SPACE_BEFORE_PUNCT_RE = re.compile(r" +([.,;:!?])")
_MISSING_SPACE_AFTER_PUNCT_RE = re.compile(r"([.,;:!?])(?=[^\W\d_])")


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    title: str
    body: str
    lang: str


@dataclass(frozen=True)
class Entity:
    surface: str
    label: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    title: str
    text: str
    lang: str
    token_count: int
    entities: tuple[Entity, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["entities"] = [asdict(e) for e in self.entities]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Chunk":
        ents = tuple(Entity(**e) for e in d.get("entities", ()))
        return cls(
            chunk_id=d["chunk_id"],
            doc_id=d["doc_id"],
            title=d.get("title", ""),
            text=d["text"],
            lang=d.get("lang", "und"),
            token_count=int(d["token_count"]),
            entities=ents,
        )


@dataclass(frozen=True)
class IngestOptions:
    max_tokens: int = 512
    overlap: int = 64

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if not 0 <= self.overlap < self.max_tokens:
            raise ValueError("overlap must satisfy 0 <= overlap < max_tokens")


CLEANING_OPTIONS = {
    "unicode_normalization": "NFC",
    "html": "strip-tags+decode-entities",
    "whitespace": "collapse",
    "punctuation": "no-space-before,space-after-before-letter",
}


@dataclass(frozen=True)
class Corpus:
    chunks: tuple[Chunk, ...]
    manifest: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.chunks)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(c.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for c in self.chunks
        )


def _clean_once(text: str) -> str:
    text = unicodedata.normalize("NFC", text)
    text = html.unescape(text)
    text = _TAG_RE.sub(" ", text)
    text = unicodedata.normalize("NFC", text)
    text = _WS_RE.sub(" ", text)
    text = _SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)
    text = _MISSING_SPACE_AFTER_PUNCT_RE.sub(r"\1 ", text)
    return text.strip()


def preprocess_text(raw: str) -> str:
    """Minimal cleaning: NFC, tag removal, whitespace and punctuation spacing.

    OCR noise is left alone. The cleaning pass is repeated until it reaches a
    fixed point (entity decoding can expose new markup, e.g. ``&amp;lt;b&amp;gt;``),
    which makes the function idempotent.
    """
    prev, cur = None, raw
    for _ in range(16):
        if cur == prev:
            break
        prev, cur = cur, _clean_once(cur)
    return cur


def chunk_windows(n_tokens: int, max_tokens: int = 512, overlap: int = 64) -> list[tuple[int, int]]:
    """Half-open token ranges of a sliding window with stride ``max_tokens - overlap``."""
    if max_tokens < 1 or not 0 <= overlap < max_tokens:
        raise ValueError("need max_tokens >= 1 and 0 <= overlap < max_tokens")
    stride = max_tokens - overlap
    windows = []
    start = 0
    while start < n_tokens:
        end = min(start + max_tokens, n_tokens)
        windows.append((start, end))
        if end == n_tokens:
            break
        start += stride
    return windows


def chunk_document(doc: RawDocument, max_tokens: int = 512, overlap: int = 64) -> list[Chunk]:
    tokens = doc.body.split()
    chunks = []
    for ordinal, (lo, hi) in enumerate(chunk_windows(len(tokens), max_tokens, overlap)):
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{ordinal}",
                doc_id=doc.doc_id,
                title=doc.title,
                text=" ".join(tokens[lo:hi]),
                lang=doc.lang,
                token_count=hi - lo,
            )
        )
    return chunks


class EntityBackend(Protocol):
    def extract(self, texts: Sequence[str], lang: str) -> list[list[dict[str, Any]]]: ...


class NoEntityBackend:
    """The ``none`` NER backend: never returns entities."""

    name = "none"

    def extract(self, texts: Sequence[str], lang: str) -> list[list[dict[str, Any]]]:
        return [[] for _ in texts]


def validate_entities(text: str, raw: Iterable[dict[str, Any]]) -> tuple[list[Entity], int]:
    """Keep entities whose span is in range and whose surface matches the slice."""
    kept: list[Entity] = []
    dropped = 0
    for r in raw:
        try:
            start, end = int(r["start"]), int(r["end"])
            surface, label = str(r["surface"]), str(r["label"])
        except (KeyError, TypeError, ValueError):
            dropped += 1
            continue
        if 0 <= start < end <= len(text) and text[start:end] == surface:
            kept.append(Entity(surface, label, start, end))
        else:
            dropped += 1
    return kept, dropped


def annotate_entities(chunk: Chunk, ner: EntityBackend | None, stats: Counter | None = None) -> Chunk:
    """Attach entities from ``ner``; invalid spans are dropped and counted in ``stats``."""
    if ner is None or isinstance(ner, NoEntityBackend):
        return chunk if not chunk.entities else _with_entities(chunk, [])
    try:
        raw = ner.extract([chunk.text], chunk.lang)[0]
    except BackendError as exc:
        raise AnnotationError(chunk.chunk_id, str(exc)) from exc
    kept, dropped = validate_entities(chunk.text, raw)
    if dropped:
        log.warning("dropped %d invalid entity span(s) in %s", dropped, chunk.chunk_id)
        if stats is not None:
            stats["dropped_entities"] += dropped
    if stats is not None:
        stats["entities"] += len(kept)
    return _with_entities(chunk, kept)


def _with_entities(chunk: Chunk, ents: list[Entity]) -> Chunk:
    return Chunk(chunk.chunk_id, chunk.doc_id, chunk.title, chunk.text, chunk.lang, chunk.token_count, tuple(ents))


def annotate_corpus(
    corpus: Corpus,
    ner: EntityBackend | None,
    *,
    on_error: str = "abort",
    stats: Counter | None = None,
) -> Corpus:
    """Annotate every chunk. ``on_error`` is ``"abort"`` or ``"skip"`` (keep chunk, warn)."""
    if on_error not in ("abort", "skip"):
        raise ValueError("on_error must be 'abort' or 'skip'")
    stats = stats if stats is not None else Counter()
    out = []
    for chunk in corpus.chunks:
        try:
            out.append(annotate_entities(chunk, ner, stats))
        except AnnotationError as exc:
            if on_error == "abort":
                raise
            log.warning("%s; keeping chunk without entities", exc)
            stats["annotation_failures"] += 1
            out.append(chunk)
    manifest = dict(corpus.manifest)
    manifest["ner_backend"] = getattr(ner, "name", "none") if ner is not None else "none"
    return Corpus(tuple(out), manifest)


def _ingestion_timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return now.isoformat(timespec="seconds")


def read_documents(path: str | os.PathLike) -> list[RawDocument]:
    docs = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or not obj.get("doc_id") or "text" not in obj:
                raise CorpusFormatError(f"{path}: line {lineno}: expected an object with 'doc_id' and 'text'")
            doc_id = str(obj["doc_id"])
            if doc_id in seen:
                raise CorpusFormatError(f"{path}: line {lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            docs.append(RawDocument(doc_id, str(obj.get("title", "")), str(obj["text"]), str(obj.get("lang", "und"))))
    return docs


def load_corpus(path: str | os.PathLike, options: IngestOptions = IngestOptions()) -> Corpus:
    chunks: list[Chunk] = []
    n_docs = 0
    for doc in read_documents(path):
        n_docs += 1
        clean = RawDocument(doc.doc_id, preprocess_text(doc.title), preprocess_text(doc.body), doc.lang)
        chunks.extend(chunk_document(clean, options.max_tokens, options.overlap))
    manifest = {
        "source_path": str(path),
        "ingestion_timestamp": _ingestion_timestamp(),
        "cleaning_options": dict(CLEANING_OPTIONS),
        "chunking_options": {"max_tokens": options.max_tokens, "overlap": options.overlap, "unit": "whitespace-token"},
        "documents": n_docs,
        "chunks": len(chunks),
    }
    return Corpus(tuple(chunks), manifest)


def manifest_path(corpus_path: str | os.PathLike) -> Path:
    return Path(corpus_path).with_suffix(".manifest.json")


def save_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    """Write chunks as JSONL and the manifest as JSON next to it."""
    Path(path).write_text(corpus.to_jsonl(), encoding="utf-8", newline="\n")
    manifest_path(path).write_text(json.dumps(corpus.manifest, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")


def load_chunks(path: str | os.PathLike) -> Corpus:
    """Read a corpus previously written by :func:`save_corpus`."""
    chunks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                chunks.append(Chunk.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: not a chunk record ({exc})") from exc
    mpath = manifest_path(path)
    manifest = json.loads(mpath.read_text(encoding="utf-8")) if mpath.exists() else {}
    return Corpus(tuple(chunks), manifest)


def is_chunk_file(path: str | os.PathLike) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                try:
                    return "chunk_id" in json.loads(line)
                except json.JSONDecodeError:
                    return False
    return False
