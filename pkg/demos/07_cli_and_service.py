"""The command line and the HTTP service, driven end to end offline."""

import json
import subprocess
import sys
import tempfile
import threading
import time
from pathlib import Path

import httpx
import uvicorn

from histrag.backends import ScriptedLlm
from histrag.config import bundled_data
from histrag.index import load_index
from histrag.embedding import ProviderConfig
from histrag.pipeline import Pipeline
from histrag.service import create_app


def cli(*args):
    out = subprocess.run([sys.executable, "-m", "histrag.cli", *args], capture_output=True, text=True)
    print("$ histrag", " ".join(args[:1]), "->", out.returncode)
    print(out.stdout[:600] or out.stderr)
    return out


tmp = Path(tempfile.mkdtemp())
cli("ingest", str(bundled_data("toy_corpus.jsonl")), str(tmp / "chunks.jsonl"), "--ner-kind", "gazetteer")
cli("index", str(tmp / "chunks.jsonl"), str(tmp / "toy.idx"))
cli("search", str(tmp / "toy.idx"), "Who invented the cinematograph?", "--llm-kind", "scripted", "--k", "5")
cli("ask", str(tmp / "toy.idx"), "Qui est Antoine Meillet?", "--llm-kind", "scripted", "--lang", "fr")
cli("ask", str(tmp / "toy.idx"), "Qui est Antoine Meillet?")  # no LLM configured
cli("bench", str(tmp / "toy.idx"), str(bundled_data("qa_questions.jsonl")), "--llm-kind", "scripted", "--ask")

index = load_index(tmp / "toy.idx")
app = create_app(lambda: Pipeline(index, ProviderConfig(dim=256), llm=ScriptedLlm.from_file(bundled_data("mock_llm.json"))))
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=8765, log_level="warning"))
threading.Thread(target=server.run, daemon=True).start()

with httpx.Client(base_url="http://127.0.0.1:8765") as http:
    for _ in range(200):
        try:
            if http.get("/health").status_code == 200:
                break
        except httpx.TransportError:
            pass
        time.sleep(0.05)
    print(http.get("/health").json())
    print(http.post("/search", json={"query": "Titanic", "k": 0}).status_code)
    r = http.post("/search", json={"query": "Who wrote J'accuse?", "k": 3})
    print(json.dumps(r.json()["results"], ensure_ascii=False)[:300])
    r = http.post("/ask", json={"question": "Comment les Romains ont-ils atteint Mars?", "lang": "fr"})
    print(r.status_code, r.json()["answer"]["abstained"])
server.should_exit = True
