from __future__ import annotations

import pytest

from histrag.backends import ScriptedLlm
from histrag.config import bundled_data
from histrag.corpus import load_corpus
from histrag.embedding import ProviderConfig
from histrag.evaluation import read_qrels, read_queries
from histrag.index import build_index


@pytest.fixture(scope="session")
def data_dir():
    return bundled_data("toy_corpus.jsonl").parent


@pytest.fixture(scope="session")
def provider():
    return ProviderConfig(dim=256)


@pytest.fixture(scope="session")
def toy_corpus(data_dir):
    return load_corpus(data_dir / "toy_corpus.jsonl")


@pytest.fixture(scope="session")
def toy_index(toy_corpus, provider):
    return build_index(toy_corpus, provider)


@pytest.fixture
def mock_llm(data_dir):
    return ScriptedLlm.from_file(data_dir / "mock_llm.json")


@pytest.fixture(scope="session")
def bench_suite(data_dir):
    return read_queries(data_dir / "bench_queries.jsonl"), read_qrels(data_dir / "bench_qrels.txt")


@pytest.fixture(scope="session")
def qa_suite(data_dir):
    return read_queries(data_dir / "qa_questions.jsonl"), read_qrels(data_dir / "qa_qrels.txt")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            ok = key == "passed" and outcomes.get(name, True)
            outcomes[name] = ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcomes):
        number = int(name.split("_")[2])
        label = name.split("_", 3)[3].replace("_", " ")
        terminalreporter.write_line(f"{'PASS' if outcomes[name] else 'FAIL'} criterion {number}: {label}")
