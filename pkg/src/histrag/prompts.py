"""Prompt template files and placeholder substitution."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

QUERY_VARIATION = "query_variation.txt"
HISTORICAL_QA = "historical_qa.txt"
ANSWER_GENERATION = "answer_generation.txt"
CLAIM_DECOMPOSITION = "claim_decomposition.txt"
CLAIM_VERDICT = "claim_verdict.txt"
QUESTION_GENERATION = "question_generation.txt"

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Load a bundled template by file name, or any template file by path."""
    path = Path(name)
    if path.is_absolute() or path.parent != Path("."):
        return path.read_text(encoding="utf-8")
    return resources.files("histrag").joinpath("templates").joinpath(name).read_text(encoding="utf-8")


def render(template: str, **values: object) -> str:
    """Substitute ``{name}`` placeholders in a single pass.

    Unknown placeholders are left as-is, and substituted values are never
    rescanned, so a query containing ``{query}`` cannot inject anything.
    """
    def sub(m: re.Match) -> str:
        key = m.group(1)
        return str(values[key]) if key in values else m.group(0)

    return _PLACEHOLDER.sub(sub, template)
