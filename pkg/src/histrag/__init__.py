"""Hybrid retrieval-augmented question answering over noisy multilingual corpora."""

from .corpus import Chunk, Corpus, Entity, IngestOptions, RawDocument, chunk_document, load_corpus, preprocess_text
from .embedding import Embedding, ProviderConfig, embed_batch, fallback_embed
from .generation import (
    Answer,
    EvidenceContext,
    GenerationConfig,
    build_answer_prompt,
    detect_abstention,
    generate_answer,
    structure_context,
)
from .index import RankedList, VectorIndex, build_index, load_index, save_index, search
from .pipeline import AskResponse, Pipeline
from .retrieval import FusedResult, QuerySet, RetrievalConfig, expand_query, lexical_search, retrieve_hybrid, rrf_fuse

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "AskResponse",
    "Chunk",
    "Corpus",
    "Embedding",
    "Entity",
    "EvidenceContext",
    "FusedResult",
    "GenerationConfig",
    "IngestOptions",
    "Pipeline",
    "ProviderConfig",
    "QuerySet",
    "RankedList",
    "RawDocument",
    "RetrievalConfig",
    "VectorIndex",
    "build_answer_prompt",
    "build_index",
    "chunk_document",
    "detect_abstention",
    "embed_batch",
    "expand_query",
    "fallback_embed",
    "generate_answer",
    "lexical_search",
    "load_corpus",
    "load_index",
    "preprocess_text",
    "retrieve_hybrid",
    "rrf_fuse",
    "save_index",
    "search",
    "structure_context",
]
