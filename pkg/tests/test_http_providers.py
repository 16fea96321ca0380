"""HTTP provider contracts exercised against a real local server."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from seller_insights.embedding import HttpEmbedder
from seller_insights.errors import LlmTimeout, ProviderError, ProviderUnavailable
from seller_insights.llm import CompletionRequest, HttpProvider


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        if self.path == "/complete":
            if body.get("prompt") == "explode":
                self.send_response(500)
                self.end_headers()
                return
            payload = {
                "text": f"echo:{body['prompt']}|t={body['temperature']}|auth="
                f"{self.headers.get('Authorization', '')}"
            }
        elif self.path == "/embed":
            seedling = float(len(body["text"]))
            payload = {"vector": [seedling, 1.0, 2.0, 3.0]}
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def server():
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}"
    httpd.shutdown()


class TestHttpProvider:
    def test_round_trip_with_bearer_token(self, server, monkeypatch):
        monkeypatch.setenv("LLM_API_TOKEN", "sekret")
        provider = HttpProvider(f"{server}/complete")
        out = provider.complete(CompletionRequest(prompt="hello", temperature=0.0))
        assert out.startswith("echo:hello")
        assert "t=0.0" in out  # temperature forwarded verbatim
        assert "Bearer sekret" in out

    def test_no_token_sends_no_header(self, server, monkeypatch):
        monkeypatch.delenv("LLM_API_TOKEN", raising=False)
        provider = HttpProvider(f"{server}/complete")
        out = provider.complete(CompletionRequest(prompt="hi"))
        assert out.endswith("auth=")

    def test_server_error_maps_to_provider_error(self, server):
        provider = HttpProvider(f"{server}/complete")
        with pytest.raises(ProviderError):
            provider.complete(CompletionRequest(prompt="explode"))

    def test_unreachable_maps_to_provider_error(self):
        provider = HttpProvider("http://127.0.0.1:9/complete")
        with pytest.raises((ProviderError, LlmTimeout)):
            provider.complete(CompletionRequest(prompt="hi"), timeout_s=0.2)


class TestHttpEmbedder:
    def test_dimension_discovery_and_renormalization(self, server):
        embedder = HttpEmbedder(f"{server}/embed")
        assert embedder.spec.dimension == 4
        v = embedder.embed("hello")
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-6

    def test_unreachable_is_provider_unavailable(self):
        with pytest.raises(ProviderUnavailable):
            HttpEmbedder("http://127.0.0.1:9/embed", timeout_s=0.2)
