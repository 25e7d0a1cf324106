import json

import pytest

from histrag.backends import GazetteerEntityBackend, RemoteLlm, ScriptedLlm
from histrag.config import AppConfig, bundled_data, load_config, provider_for_index
from histrag.corpus import NoEntityBackend
from histrag.errors import ConfigError


def write(tmp_path, obj):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj))
    return path


def test_defaults():
    cfg = load_config(env={})
    assert cfg.embedding.kind == "fallback" and cfg.embedding.dim == 256
    assert cfg.retrieval.rrf_k == 60 and cfg.retrieval.num_variations == 5
    assert cfg.generation.temperature == 0.3
    assert cfg.llm_backend() is None
    assert isinstance(cfg.ner_backend(), NoEntityBackend)


def test_precedence_cli_over_env_over_file(tmp_path):
    path = write(tmp_path, {"llm": {"base_url": "http://file"}, "retrieval": {"rrf_k": 10}, "embedding": {"dim": 64}})
    cfg = load_config(path, env={})
    assert (cfg.llm.base_url, cfg.retrieval.rrf_k, cfg.embedding.dim) == ("http://file", 10, 64)
    cfg = load_config(path, env={"LLM_API_BASE": "http://env"})
    assert cfg.llm.base_url == "http://env"
    cfg = load_config(path, env={"LLM_API_BASE": "http://env"},
                      overrides={"llm": {"base_url": "http://cli"}, "retrieval": {"rrf_k": 30}})
    assert (cfg.llm.base_url, cfg.retrieval.rrf_k) == ("http://cli", 30)


def test_unset_overrides_fall_through(tmp_path):
    cfg = load_config(write(tmp_path, {"retrieval": {"rrf_k": 10}}), env={}, overrides={"retrieval": {"rrf_k": None}})
    assert cfg.retrieval.rrf_k == 10


def test_env_variables_map_to_sections():
    env = {"EMBED_API_BASE": "http://e", "EMBED_API_KEY": "k1", "LLM_API_BASE": "http://l", "LLM_API_KEY": "k2",
           "NER_API_BASE": "http://n"}
    cfg = load_config(env=env)
    assert (cfg.embedding.base_url, cfg.embedding.api_key) == ("http://e", "k1")
    assert (cfg.llm.base_url, cfg.llm.api_key, cfg.ner.base_url) == ("http://l", "k2", "http://n")
    assert isinstance(cfg.llm_backend(), RemoteLlm)


@pytest.mark.parametrize("bad", [
    {"nope": 1},
    {"retrieval": {"nope": 1}},
    {"retrieval": 5},
    {"embedding": {"kind": "magic"}},
    {"llm": {"kind": "scripted"}},
    {"llm": {"kind": "scripted", "script": "/missing.json"}},
    {"ner": {"kind": "gazetteer", "gazetteer": "/missing.json"}},
    {"retrieval": {"expansion_template": "missing.txt"}},
    {"retrieval": {"rrf_k": 0}},
])
def test_invalid_configs_rejected(tmp_path, bad):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, bad), env={})


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json", env={})
    (tmp_path / "x.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "x.json", env={})


def test_scripted_and_gazetteer_backends():
    cfg = load_config(env={}, overrides={"llm": {"kind": "scripted", "script": str(bundled_data("mock_llm.json"))},
                                         "ner": {"kind": "gazetteer", "gazetteer": str(bundled_data("gazetteer.json"))}})
    assert isinstance(cfg.llm_backend(), ScriptedLlm)
    assert isinstance(cfg.ner_backend(), GazetteerEntityBackend)


def test_remote_kinds_need_endpoints():
    with pytest.raises(ConfigError, match="EMBED_API_BASE"):
        load_config(env={}, overrides={"embedding": {"kind": "remote"}}).embedding_provider()
    with pytest.raises(ConfigError, match="LLM_API_BASE"):
        load_config(env={}, overrides={"llm": {"kind": "remote"}}).llm_backend()
    with pytest.raises(ConfigError, match="NER_API_BASE"):
        load_config(env={}, overrides={"ner": {"kind": "remote"}}).ner_backend()


def test_abstention_phrases_replaced_whole(tmp_path):
    cfg = load_config(write(tmp_path, {"generation": {"abstention_phrases": {"en": ["no idea"]}}}), env={})
    assert cfg.generation.abstention_phrases == {"en": ("no idea",)}


def test_round_trip_through_file(tmp_path):
    cfg = load_config(env={}, overrides={"retrieval": {"rrf_k": 7}, "service": {"port": 9001}})
    again = load_config(write(tmp_path, cfg.to_dict()), env={})
    assert again == cfg


def test_provider_for_index_adopts_fallback_parameters():
    cfg = AppConfig()
    p = provider_for_index(cfg, "fallback-hash/dim=64/seed=3")
    assert (p.dim, p.seed) == (64, 3)
    with pytest.raises(ConfigError):
        provider_for_index(cfg, "remote/some-model/dim=768")
