import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenegen.ingest import CATEGORIES
from scenegen.llm import (AuthError, CompletionRequest, LLMAdapter, LLMError, SchemaError, SchemaHint,
                          hash_uniforms, parse_payload)


def req(kind=None, dim=0, user="hello"):
    return CompletionRequest("system", user, schema_hint=SchemaHint(kind, dim) if kind else None)


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("", "x")
    with pytest.raises(ValueError):
        CompletionRequest("s", "u", temperature=-1)
    with pytest.raises(ValueError):
        SchemaHint("feature-vector", 0)
    with pytest.raises(ValueError):
        SchemaHint("poem")


def test_stub_score_is_deterministic():
    a = LLMAdapter("stub", seed=4)
    r1, r2 = a.complete(req("score")), a.complete(req("score"))
    assert r1.text == r2.text and r1.parsed == r2.parsed
    assert 0 <= r1.parsed <= 1 and r1.provenance == "stub"
    assert LLMAdapter("stub", seed=5).complete(req("score")).text != r1.text


def test_stub_feature_vector_schema():
    v = LLMAdapter("stub", seed=1).complete(req("feature-vector", 8)).parsed
    assert len(v) == 8 and all(0 <= x <= 1 for x in v)


def test_stub_category_label():
    assert LLMAdapter("stub").complete(req("category-label")).parsed in CATEGORIES


def test_extract_features():
    a = LLMAdapter("stub", seed=2)
    assert a.extract_features("api one", 6) == a.extract_features("api one", 6)
    assert len(a.extract_features("x", 1)) == 1
    with pytest.raises(ValueError):
        a.extract_features("x", 0)


def test_feature_vectors_differ_across_corpus():
    a = LLMAdapter("stub", seed=0)
    vecs = {tuple(a.extract_features(f"API {i} description", 8)) for i in range(300)}
    assert len(vecs) == 300


@given(st.integers(0, 2**32), st.integers(1, 40), st.text(min_size=1, max_size=20))
def test_hash_uniforms_in_unit_interval(seed, n, part):
    u = hash_uniforms(seed, n, part)
    assert len(u) == n and all(0 <= x < 1 for x in u)
    assert u == hash_uniforms(seed, n, part)


def test_parse_payload():
    assert parse_payload("0.1, 0.2,0.3", SchemaHint("feature-vector", 3)) == [0.1, 0.2, 0.3]
    with pytest.raises(SchemaError):
        parse_payload("0.1", SchemaHint("feature-vector", 2))
    with pytest.raises(SchemaError):
        parse_payload("1.5, 0.2", SchemaHint("feature-vector", 2))
    assert parse_payload("score: 1.7", SchemaHint("score")) == 1.0
    assert parse_payload("It is Lifestyle Services.", SchemaHint("category-label")) == "Lifestyle Services"
    assert parse_payload("\n NF >= 0.5 \nmore", SchemaHint("rule-text")) == "NF >= 0.5"
    assert parse_payload("anything", None) is None


def test_stub_rule_text_normalises_last_line():
    r = LLMAdapter("stub").complete(CompletionRequest("translate", "context\nReachability must be at least 0.9",
                                                      schema_hint=SchemaHint("rule-text")))
    assert r.parsed == "Reachability >= 0.9"


# -- remote mode against a local server -------------------------------------


class _Handler(BaseHTTPRequestHandler):
    calls: list = []
    script: list = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).calls.append((self.path, self.headers.get("Authorization"), body))
        status, content = type(self).script.pop(0) if type(self).script else (200, "0.25")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        if status == 200:
            self.wfile.write(json.dumps({"choices": [{"message": {"content": content}}]}).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.calls, _Handler.script = [], []
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_port}/v1", _Handler
    srv.shutdown()


def test_remote_round_trip(server):
    url, h = server
    a = LLMAdapter("remote", endpoint=url, model="m", api_key="k")
    r = a.complete(req("score"))
    assert r.parsed == 0.25 and r.provenance == "remote"
    path, auth, body = h.calls[0]
    assert path == "/v1/chat/completions" and auth == "Bearer k"
    assert body["messages"][1]["content"] == "hello" and body["model"] == "m"


def test_remote_bad_key_is_auth_error(server):
    url, h = server
    h.script = [(401, "")]
    with pytest.raises(AuthError):
        LLMAdapter("remote", endpoint=url, api_key="bad").complete(req())
    assert len(h.calls) == 1


def test_remote_retries_transient_failures(server):
    url, h = server
    h.script = [(500, ""), (503, ""), (200, "0.75")]
    r = LLMAdapter("remote", endpoint=url, backoff=0.01).complete(req("score"))
    assert r.parsed == 0.75 and len(h.calls) == 3


def test_remote_gives_up(server):
    url, h = server
    h.script = [(500, "")] * 3
    with pytest.raises(LLMError):
        LLMAdapter("remote", endpoint=url, backoff=0.01).complete(req())


def test_remote_needs_endpoint():
    with pytest.raises(ValueError):
        LLMAdapter("remote")
    with pytest.raises(ValueError):
        LLMAdapter("carrier-pigeon")


def test_api_key_from_environment(monkeypatch):
    monkeypatch.setenv("MY_KEY", "sekrit")
    assert LLMAdapter.from_env("stub", key_env="MY_KEY").api_key == "sekrit"
