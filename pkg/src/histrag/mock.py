"""In-process mock of the embedding, chat-completion and NER HTTP services.

Speaks the same wire protocol the remote clients use, backed by the hashed
fallback embedder, a scripted LLM and a gazetteer, so the remote code paths
can be exercised offline::

    with MockBackendServer(llm=ScriptedLlm.from_file(path)) as srv:
        os.environ["LLM_API_BASE"] = srv.url
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from .backends import GazetteerEntityBackend, LlmBackend
from .embedding import fallback_embed


class MockBackendServer:
    """Threaded HTTP server on 127.0.0.1 with an OS-assigned port.

    ``fail_first`` makes the first N requests answer HTTP 503, for exercising
    retries. ``requests`` records ``(path, body)`` for every call.
    """

    def __init__(
        self,
        *,
        llm: LlmBackend | None = None,
        ner: GazetteerEntityBackend | None = None,
        embed_dim: int = 256,
        embed_seed: int = 0,
        fail_first: int = 0,
    ):
        self.llm = llm
        self.ner = ner
        self.embed_dim = embed_dim
        self.embed_seed = embed_seed
        self.fail_first = fail_first
        self.requests: list[tuple[str, dict[str, Any]]] = []
        self._lock = threading.Lock()
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockBackendServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join()

    def __enter__(self) -> "MockBackendServer":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()

    def _respond(self, path: str, body: dict[str, Any]) -> tuple[int, dict[str, Any]]:
        with self._lock:
            self.requests.append((path, body))
            if self.fail_first > 0:
                self.fail_first -= 1
                return 503, {"error": "warming up"}
        if path == "/v1/embed":
            texts = body.get("texts")
            if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
                return 400, {"error": "'texts' must be a list of strings"}
            vectors = [fallback_embed(t, self.embed_dim, self.embed_seed).vector.tolist() for t in texts]
            return 200, {"vectors": vectors, "dim": self.embed_dim}
        if path == "/v1/chat/completions":
            if self.llm is None:
                return 404, {"error": "no LLM configured"}
            try:
                prompt = body["messages"][-1]["content"]
            except (KeyError, IndexError, TypeError):
                return 400, {"error": "'messages' missing"}
            text = self.llm.complete(prompt, temperature=float(body.get("temperature", 0.3)),
                                     max_tokens=int(body.get("max_tokens", 512)))
            return 200, {"choices": [{"message": {"role": "assistant", "content": text}}]}
        if path == "/v1/entities":
            if self.ner is None:
                return 404, {"error": "no NER configured"}
            texts = body.get("texts")
            if not isinstance(texts, list):
                return 400, {"error": "'texts' must be a list"}
            return 200, {"results": self.ner.extract(texts, str(body.get("lang", "")))}
        return 404, {"error": f"unknown path {path}"}

    def _handler(self) -> type[BaseHTTPRequestHandler]:
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except ValueError:
                    status, payload = 400, {"error": "invalid JSON"}
                else:
                    status, payload = server._respond(self.path, body if isinstance(body, dict) else {})
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, format: str, *args: Any) -> None:
                pass

        return Handler
