"""Remote and scripted backends for NER and LLM completion."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

from .errors import BackendError, ConfigError
from .transport import RetryPolicy, post_json


class LlmBackend(Protocol):
    model_name: str

    def complete(self, prompt: str, *, temperature: float = 0.3, max_tokens: int = 512) -> str: ...


@dataclass
class RemoteLlm:
    """Chat-completions client: ``POST {base}/v1/chat/completions``."""

    base_url: str
    model_name: str = "mistralai/Mistral-7B-Instruct-v0.3"
    api_key: str | None = None
    policy: RetryPolicy = field(default_factory=RetryPolicy)

    @classmethod
    def from_env(cls, model_name: str | None = None, base_url: str | None = None) -> "RemoteLlm":
        base = base_url or os.environ.get("LLM_API_BASE")
        if not base:
            raise ConfigError("no LLM endpoint configured: set LLM_API_BASE (or pass an LLM base URL)")
        kwargs = {"model_name": model_name} if model_name else {}
        return cls(base.rstrip("/"), api_key=os.environ.get("LLM_API_KEY"), **kwargs)

    def complete(self, prompt: str, *, temperature: float = 0.3, max_tokens: int = 512) -> str:
        body = post_json(
            f"{self.base_url}/v1/chat/completions",
            {
                "model": self.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": temperature,
                "max_tokens": max_tokens,
            },
            component="llm",
            api_key=self.api_key,
            policy=self.policy,
        )
        try:
            return str(body["choices"][0]["message"]["content"] or "")
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("llm", f"malformed completion payload: {str(body)[:200]}") from exc


@dataclass(frozen=True)
class ScriptRule:
    contains: tuple[str, ...]
    response: str
    requires_context: tuple[str, ...] = ()
    otherwise: str | None = None


class ScriptedLlm:
    """Deterministic offline LLM driven by a rule file.

    Rules are checked in order; the first whose ``contains`` substrings all
    occur in the prompt fires. A rule with ``requires_context`` only returns
    its response when those substrings also appear in the prompt (i.e. the
    evidence was retrieved); otherwise it returns ``otherwise`` or the
    script's ``abstain`` text, like a model that follows a grounding prompt.
    """

    def __init__(self, rules: Sequence[ScriptRule], default: str = "", abstain: str = "", model_name: str = "scripted-mock"):
        self.rules = list(rules)
        self.default = default
        self.abstain = abstain
        self.model_name = model_name
        self.calls: list[dict[str, Any]] = []

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ScriptedLlm":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [
            ScriptRule(
                contains=tuple(r["contains"]),
                response=r["response"],
                requires_context=tuple(r.get("requires_context", ())),
                otherwise=r.get("otherwise"),
            )
            for r in data.get("rules", [])
        ]
        return cls(rules, data.get("default", ""), data.get("abstain", ""), data.get("model_name", "scripted-mock"))

    def complete(self, prompt: str, *, temperature: float = 0.3, max_tokens: int = 512) -> str:
        self.calls.append({"prompt": prompt, "temperature": temperature, "max_tokens": max_tokens})
        for rule in self.rules:
            if all(s in prompt for s in rule.contains):
                if all(s in prompt for s in rule.requires_context):
                    return rule.response
                return rule.otherwise if rule.otherwise is not None else self.abstain
        return self.default


class FailingLlm:
    """Backend that always fails at the transport level (for degradation paths)."""

    model_name = "failing"

    def complete(self, prompt: str, *, temperature: float = 0.3, max_tokens: int = 512) -> str:
        raise BackendError("llm", "simulated outage")


@dataclass
class RemoteEntityBackend:
    """NER client: ``POST {base}/v1/entities``."""

    base_url: str
    policy: RetryPolicy = field(default_factory=RetryPolicy)
    name: str = "remote"

    @classmethod
    def from_env(cls, base_url: str | None = None) -> "RemoteEntityBackend":
        base = base_url or os.environ.get("NER_API_BASE")
        if not base:
            raise ConfigError("no NER endpoint configured: set NER_API_BASE or use the 'none' backend")
        return cls(base.rstrip("/"))

    def extract(self, texts: Sequence[str], lang: str) -> list[list[dict[str, Any]]]:
        body = post_json(
            f"{self.base_url}/v1/entities",
            {"texts": list(texts), "lang": lang},
            component="ner",
            policy=self.policy,
        )
        results = body.get("results")
        if not isinstance(results, list) or len(results) != len(texts):
            raise BackendError("ner", "response 'results' does not align with request texts")
        return results


class GazetteerEntityBackend:
    """Offline NER: exact, case-sensitive matches of a fixed surface->label list."""

    name = "gazetteer"

    def __init__(self, entries: dict[str, str]):
        # longest first so "Walter Porzig" wins over "Porzig"
        self.entries = sorted(entries.items(), key=lambda kv: (-len(kv[0]), kv[0]))

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "GazetteerEntityBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def extract(self, texts: Sequence[str], lang: str) -> list[list[dict[str, Any]]]:
        out = []
        for text in texts:
            taken = [False] * len(text)
            found = []
            for surface, label in self.entries:
                for m in re.finditer(re.escape(surface), text):
                    s, e = m.span()
                    if not any(taken[s:e]):
                        taken[s:e] = [True] * (e - s)
                        found.append({"surface": surface, "label": label, "start": s, "end": e})
            out.append(sorted(found, key=lambda r: r["start"]))
        return out
