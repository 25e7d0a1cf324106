"""Syntactic relevance of extracted entities."""

from __future__ import annotations

import unicodedata
from typing import Iterable, Sequence, Union

from ..corpus import CORE_LABELS, Entity
from ..errors import UndefinedMetricError

FUNCTION_WORDS = {
    "en": frozenset(
        "a an the of in on at to for from by with and or but as into onto than that this these those "
        "is was are were be its his her their our your".split()
    ),
    "fr": frozenset(
        "le la les l un une des du de d et ou à au aux en dans par pour sur sous selon avec sans chez "
        "que qui dont ce cet cette ces son sa ses leur leurs est était".split()
    ),
}

EntityLike = Union[Entity, Sequence[str]]


def _surface_label(e: EntityLike) -> tuple[str, str]:
    if isinstance(e, Entity):
        return e.surface, e.label
    return str(e[0]), str(e[1])


def _is_punct_or_space(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def is_coherent(entity: EntityLike, lang: str | None = None) -> bool:
    """Entity forms a complete unit: no '##' pieces, clean edges, core label,
    and no leading lowercase function word."""
    surface, label = _surface_label(entity)
    if not surface or "##" in surface:
        return False
    if _is_punct_or_space(surface[0]) or _is_punct_or_space(surface[-1]):
        return False
    if label not in CORE_LABELS:
        return False
    first = surface.split()[0]
    stop = FUNCTION_WORDS.get(lang) if lang else None
    if stop is None:
        stop = frozenset().union(*FUNCTION_WORDS.values())
    head = first.split("'")[0].split("’")[0]
    if first[0].islower() and (first in stop or head in stop):
        return False
    return True


def syntactic_relevance(entity_sets: Iterable[Iterable[EntityLike]], lang: str | None = None) -> float:
    """Fraction of coherent entities over all entities of all texts."""
    total = coherent = 0
    for ents in entity_sets:
        for e in ents:
            total += 1
            coherent += is_coherent(e, lang)
    if total == 0:
        raise UndefinedMetricError("syntactic relevance is undefined without entities")
    return coherent / total
