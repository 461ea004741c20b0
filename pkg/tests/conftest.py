import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from cmrbench.core import default_label_set


class StubOllama:
    """Tiny Ollama-compatible server recording every request it receives."""

    def __init__(self, models=("gemma2:27b", "qwen2.5:32b"), responses=None, status=200,
                 total_duration=1_500_000_000):
        self.models = list(models)
        self.responses = responses or {}
        self.status = status
        self.total_duration = total_duration
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code, payload):
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                stub.requests.append(("GET", self.path, None))
                if self.path == "/api/tags":
                    self._send(200, {"models": [{"name": m, "size": 1} for m in stub.models]})
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                raw = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                stub.requests.append(("POST", self.path, raw))
                body = json.loads(raw)
                if stub.status != 200:
                    self._send(stub.status, {"error": "boom"})
                    return
                if body["model"] not in stub.models:
                    self._send(404, {"error": f"model '{body['model']}' not found"})
                    return
                text = stub.responses.get(body["model"], '{"diagnosis":"NORMAL"}')
                payload = {"model": body["model"], "response": text, "done": True}
                if stub.total_duration is not None:
                    payload["total_duration"] = stub.total_duration
                self._send(200, payload)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    def posts(self):
        return [r for r in self.requests if r[0] == "POST"]


@pytest.fixture
def stub_server():
    with StubOllama() as stub:
        yield stub


@pytest.fixture
def labels():
    return default_label_set()


def unused_port_url():
    import socket

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return f"http://127.0.0.1:{port}"
