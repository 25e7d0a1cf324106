"""Application configuration: JSON file, environment and CLI overrides.

Precedence is CLI flag > environment variable > config file > default. The
file is a JSON object with the same nesting as :class:`AppConfig`::

    {
      "paths": {"corpus": "chunks.jsonl", "index": "toy.idx", "reports": "reports"},
      "embedding": {"kind": "fallback", "dim": 256, "seed": 0},
      "llm": {"kind": "scripted", "script": "mock_llm.json"},
      "ner": {"kind": "none"},
      "judge": {"kind": "offline", "questions": 3},
      "retrieval": {"num_variations": 5, "rrf_k": 60, "final_k": 5},
      "generation": {"temperature": 0.3, "max_output_tokens": 512},
      "service": {"host": "127.0.0.1", "port": 8000},
      "log_level": "INFO"
    }
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .backends import GazetteerEntityBackend, LlmBackend, RemoteEntityBackend, RemoteLlm, ScriptedLlm
from .corpus import EntityBackend, NoEntityBackend
from .embedding import ProviderConfig
from .errors import ConfigError
from .generation import GenerationConfig
from .prompts import load_template
from .retrieval import RetrievalConfig

EMBEDDING_KINDS = ("fallback", "remote")
LLM_KINDS = ("auto", "remote", "scripted", "none")
NER_KINDS = ("none", "remote", "gazetteer")
JUDGE_KINDS = ("offline", "llm")

# (section, key) filled from each variable when set
ENV_VARS = {
    "EMBED_API_BASE": ("embedding", "base_url"),
    "EMBED_API_KEY": ("embedding", "api_key"),
    "LLM_API_BASE": ("llm", "base_url"),
    "LLM_API_KEY": ("llm", "api_key"),
    "NER_API_BASE": ("ner", "base_url"),
}


def bundled_data(name: str) -> Path:
    """Path of a file shipped in the package's ``data`` directory."""
    return Path(str(resources.files("histrag").joinpath("data").joinpath(name)))


@dataclass(frozen=True)
class Paths:
    corpus: str | None = None
    index: str | None = None
    reports: str = "reports"


@dataclass(frozen=True)
class EmbeddingSettings:
    kind: str = "fallback"
    dim: int = 256
    model_name: str | None = None
    base_url: str | None = None
    api_key: str | None = None
    seed: int = 0
    batch_size: int = 32
    max_concurrent_requests: int = 4
    query_prefix: str = ""
    doc_prefix: str = ""


@dataclass(frozen=True)
class LlmSettings:
    kind: str = "auto"  # remote when a base URL is known, otherwise none
    model_name: str | None = None
    base_url: str | None = None
    api_key: str | None = None
    script: str | None = None


@dataclass(frozen=True)
class NerSettings:
    kind: str = "none"
    base_url: str | None = None
    gazetteer: str | None = None


@dataclass(frozen=True)
class JudgeSettings:
    kind: str = "offline"
    questions: int = 3


@dataclass(frozen=True)
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass(frozen=True)
class AppConfig:
    paths: Paths = field(default_factory=Paths)
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    llm: LlmSettings = field(default_factory=LlmSettings)
    ner: NerSettings = field(default_factory=NerSettings)
    judge: JudgeSettings = field(default_factory=JudgeSettings)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    service: ServiceSettings = field(default_factory=ServiceSettings)
    log_level: str = "INFO"

    def validate(self) -> None:
        """Check provider kinds and that referenced files exist."""
        checks = [
            (self.embedding.kind, EMBEDDING_KINDS, "embedding.kind"),
            (self.llm.kind, LLM_KINDS, "llm.kind"),
            (self.ner.kind, NER_KINDS, "ner.kind"),
            (self.judge.kind, JUDGE_KINDS, "judge.kind"),
        ]
        for value, allowed, name in checks:
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}, got {value!r}")
        for tpl in (self.retrieval.expansion_template, self.generation.template):
            try:
                load_template(tpl)
            except OSError as exc:
                raise ConfigError(f"template {tpl!r} not found") from exc
        if self.llm.kind == "scripted" and not (self.llm.script and Path(self.llm.script).is_file()):
            raise ConfigError(f"llm.kind=scripted needs an existing llm.script file, got {self.llm.script!r}")
        if self.ner.kind == "gazetteer" and not (self.ner.gazetteer and Path(self.ner.gazetteer).is_file()):
            raise ConfigError(f"ner.kind=gazetteer needs an existing ner.gazetteer file, got {self.ner.gazetteer!r}")

    def embedding_provider(self) -> ProviderConfig:
        e = self.embedding
        common = dict(dim=e.dim, batch_size=e.batch_size, max_concurrent_requests=e.max_concurrent_requests,
                      seed=e.seed, query_prefix=e.query_prefix, doc_prefix=e.doc_prefix)
        if e.kind == "fallback":
            return ProviderConfig(kind="fallback", **common)
        if not e.base_url:
            raise ConfigError("remote embedding provider has no endpoint: set EMBED_API_BASE")
        return ProviderConfig(kind="remote", model_name=e.model_name or "remote-embedder", base_url=e.base_url.rstrip("/"),
                              api_key=e.api_key, **common)

    def llm_backend(self) -> LlmBackend | None:
        """The configured LLM, or None when no LLM is configured."""
        s = self.llm
        if s.kind == "scripted":
            return ScriptedLlm.from_file(s.script)
        if s.kind == "none" or (s.kind == "auto" and not s.base_url):
            return None
        if not s.base_url:
            raise ConfigError("llm.kind=remote has no endpoint: set LLM_API_BASE")
        kwargs = {"model_name": s.model_name} if s.model_name else {}
        return RemoteLlm(s.base_url.rstrip("/"), api_key=s.api_key, **kwargs)

    def ner_backend(self) -> EntityBackend:
        s = self.ner
        if s.kind == "remote":
            if not s.base_url:
                raise ConfigError("ner.kind=remote has no endpoint: set NER_API_BASE")
            return RemoteEntityBackend(s.base_url.rstrip("/"))
        if s.kind == "gazetteer":
            return GazetteerEntityBackend.from_file(s.gazetteer)
        return NoEntityBackend()

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "generation":
                out[f.name] = {g.name: getattr(v, g.name) for g in fields(v)}
                out[f.name]["abstention_phrases"] = {k: list(p) for k, p in v.abstention_phrases.items()}
            elif hasattr(v, "__dataclass_fields__"):
                out[f.name] = {g.name: getattr(v, g.name) for g in fields(v)}
            else:
                out[f.name] = v
        return out


def _merge(base: dict[str, Any], layer: Mapping[str, Any], origin: str) -> None:
    for key, value in layer.items():
        if key not in base:
            raise ConfigError(f"{origin}: unknown config key {key!r}")
        if isinstance(base[key], dict) and key != "abstention_phrases":
            if not isinstance(value, Mapping):
                raise ConfigError(f"{origin}: {key!r} must be an object")
            _merge(base[key], value, f"{origin}.{key}")
        elif value is not None:
            base[key] = value


def _section(cls: type, values: Mapping[str, Any], name: str):
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_config(
    path: str | os.PathLike | None = None,
    *,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> AppConfig:
    """Build an :class:`AppConfig` from defaults, ``path``, ``env`` and ``overrides``.

    ``overrides`` uses the file's nesting; None values are ignored so unset CLI
    flags fall through to lower layers.
    """
    merged = copy.deepcopy(AppConfig().to_dict())
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        _merge(merged, data, str(path))
    env = os.environ if env is None else env
    for var, (section, key) in ENV_VARS.items():
        if env.get(var):
            merged[section][key] = env[var]
    if overrides:
        _merge(merged, overrides, "cli")

    gen = dict(merged["generation"])
    gen["abstention_phrases"] = {k: tuple(v) for k, v in gen["abstention_phrases"].items()}
    cfg = AppConfig(
        paths=_section(Paths, merged["paths"], "paths"),
        embedding=_section(EmbeddingSettings, merged["embedding"], "embedding"),
        llm=_section(LlmSettings, merged["llm"], "llm"),
        ner=_section(NerSettings, merged["ner"], "ner"),
        judge=_section(JudgeSettings, merged["judge"], "judge"),
        retrieval=_section(RetrievalConfig, merged["retrieval"], "retrieval"),
        generation=_section(GenerationConfig, gen, "generation"),
        service=_section(ServiceSettings, merged["service"], "service"),
        log_level=str(merged["log_level"]).upper(),
    )
    cfg.validate()
    return cfg


def provider_for_index(cfg: AppConfig, provider_id: str) -> ProviderConfig:
    """Embedding provider for querying an index built under ``provider_id``.

    A fallback index records its dim and seed in the id, so those are taken
    from the index rather than requiring the caller to repeat them.
    """
    provider = cfg.embedding_provider()
    if provider.kind == "fallback" and provider_id.startswith("fallback-hash/"):
        parts = dict(p.split("=", 1) for p in provider_id.split("/")[1:] if "=" in p)
        try:
            provider = replace(provider, dim=int(parts["dim"]), seed=int(parts["seed"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unrecognised fallback provider id {provider_id!r}") from exc
    if provider.provider_id != provider_id:
        raise ConfigError(f"index was built with {provider_id!r} but the configured provider is {provider.provider_id!r}")
    return provider
