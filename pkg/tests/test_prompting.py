import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from fixtures_prompts import HISTORY, ITEM, PROFILE, render
from kar.prompting import (
    MOVIE_FACTORS,
    NEWS_FACTORS,
    EmptyKnowledgeError,
    FactorParseError,
    GenerationError,
    HTTPChatClient,
    KnowledgeStore,
    PromptKind,
    PromptRequest,
    RateLimitError,
    RetryPolicy,
    ScenarioFactors,
    StubLLM,
    TransportError,
    build_item_prompt,
    build_preference_prompt,
    elicit_factors,
    generate_knowledge,
    generate_many,
    parse_factor_list,
)

GOLDEN = Path(__file__).parent / "golden"
MOVIE = ScenarioFactors.preset("movie")


def no_sleep(_):
    pass


class TestFactors:
    def test_movie_override(self):
        f = elicit_factors("movie", StubLLM(), override=list(MOVIE_FACTORS))
        assert f.factors == ("genre", "actors", "directors", "theme", "mood",
                             "production quality", "critical acclaim")

    def test_news_override(self):
        f = elicit_factors("news article", StubLLM(("x",)), scenario="news", override=NEWS_FACTORS)
        assert f.joined() == "topic, source, region, style, freshness, clarity, and impact"

    def test_stub_list_parsed(self):
        llm = StubLLM(responder=lambda p: "1. genre\n2. mood")
        assert elicit_factors("movie", llm).factors == ("genre", "mood")

    def test_stub_answers_question(self):
        assert elicit_factors("movie", StubLLM()).factors == MOVIE_FACTORS

    def test_bullets_and_descriptions(self):
        text = "Here you go:\n- **Genre**: the type\n* Mood: tone\n3) Critical acclaim."
        assert parse_factor_list(text) == ["genre", "mood", "critical acclaim"]

    def test_unparseable_carries_text(self):
        with pytest.raises(FactorParseError) as exc:
            elicit_factors("movie", StubLLM(responder=lambda p: "I cannot help."))
        assert exc.value.raw_text == "I cannot help."

    def test_override_wins_over_garbage(self):
        llm = StubLLM(responder=lambda p: "no list here")
        assert elicit_factors("movie", llm, override=["a"]).factors == ("a",)

    @pytest.mark.parametrize("bad", [(), ("a", "a")])
    def test_invariants(self, bad):
        with pytest.raises(ValueError):
            ScenarioFactors("movie", bad)


class TestTemplates:
    def test_goldens_byte_match(self):
        pref, item = render()
        assert pref.encode("utf-8") == (GOLDEN / "preference_prompt.txt").read_bytes()
        assert item.encode("utf-8") == (GOLDEN / "item_prompt.txt").read_bytes()

    def test_factor_names_verbatim(self):
        pref, item = render()
        for name in MOVIE_FACTORS:
            assert name in pref and name in item

    def test_section_order(self):
        pref, _ = render()
        pos = [pref.index(s) for s in ("Given a user profile", "1. Toy Story", "Factors to consider",
                                       "Analyze the user's preferences")]
        assert pos == sorted(pos)

    def test_deterministic(self):
        assert render() == render()

    def test_empty_history_clause(self):
        req = build_preference_prompt(PROFILE, [], MOVIE)
        assert "no prior movie viewing history" in req.rendered_text
        assert req.kind is PromptKind.PREFERENCE

    def test_distinct_histories_distinct_prompts(self):
        a = build_preference_prompt(PROFILE, HISTORY, MOVIE).rendered_text
        b = build_preference_prompt(PROFILE, HISTORY[:2], MOVIE).rendered_text
        c = build_preference_prompt(PROFILE, HISTORY[::-1], MOVIE).rendered_text
        assert len({a, b, c}) == 3

    def test_item_prompt_names_item(self):
        req = build_item_prompt("Titanic (1997)", MOVIE)
        assert "Titanic (1997)" in req.rendered_text
        assert req.kind is PromptKind.ITEM_FACTUAL

    def test_item_template_locality(self):
        a = build_item_prompt({**ITEM, "title": "Alpha"}, MOVIE).rendered_text
        b = build_item_prompt({**ITEM, "title": "Omega"}, MOVIE).rendered_text
        assert a.replace("Alpha", "Omega") == b

    def test_empty_factor_list(self):
        with pytest.raises(ValueError):
            build_item_prompt(ITEM, [])

    def test_hash_stable(self):
        r1 = build_item_prompt(ITEM, MOVIE)
        r2 = build_item_prompt(dict(ITEM), ScenarioFactors("movie", list(MOVIE_FACTORS)))
        assert r1.prompt_hash == r2.prompt_hash and len(r1.prompt_hash) == 64


class CountingLLM:
    provenance = "stub"

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        out = self.outcomes[min(self.calls - 1, len(self.outcomes) - 1)]
        if isinstance(out, Exception):
            raise out
        return out


REQ = PromptRequest(PromptKind.ITEM_FACTUAL, "7", "Introduce the movie X.\n")


class TestGeneration:
    def test_stub_text_mentions_factors(self):
        rec = generate_knowledge(REQ, StubLLM(), None, RetryPolicy(sleep=no_sleep))
        assert rec.provenance == "stub"
        assert all(f in rec.text for f in MOVIE_FACTORS)

    def test_stub_deterministic(self):
        assert StubLLM().complete("abc") == StubLLM().complete("abc")
        assert StubLLM().complete("abc") != StubLLM().complete("abd")

    def test_cache_hit_skips_call(self, tmp_path):
        store = KnowledgeStore(tmp_path / "k.jsonl")
        llm = StubLLM()
        first = generate_knowledge(REQ, llm, store)
        again = generate_knowledge(REQ, llm, store)
        assert llm.calls == 1 and again == first
        # reload from disk: still one record, still a hit
        store2 = KnowledgeStore(tmp_path / "k.jsonl")
        generate_knowledge(REQ, llm, store2)
        assert llm.calls == 1 and len(store2) == 1
        assert len((tmp_path / "k.jsonl").read_text().splitlines()) == 1

    def test_hash_change_overwrites(self, tmp_path):
        store = KnowledgeStore(tmp_path / "k.jsonl")
        generate_knowledge(REQ, StubLLM(), store)
        changed = PromptRequest(REQ.kind, REQ.entity_id, "Introduce the movie Y.\n")
        rec = generate_knowledge(changed, StubLLM(), store)
        reloaded = KnowledgeStore(tmp_path / "k.jsonl")
        assert len(reloaded) == 1
        assert reloaded.get("7", "item_factual") == rec
        reloaded.compact()
        assert len((tmp_path / "k.jsonl").read_text().splitlines()) == 1

    def test_store_record_keys(self, tmp_path):
        store = KnowledgeStore(tmp_path / "k.jsonl")
        generate_knowledge(REQ, StubLLM(), store)
        obj = json.loads((tmp_path / "k.jsonl").read_text())
        assert set(obj) == {"entity_id", "kind", "prompt_hash", "text", "provenance"}

    @pytest.mark.parametrize("max_retries,fails", [(1, 5), (3, 5), (4, 2), (5, 5)])
    def test_retry_call_count(self, max_retries, fails):
        outcomes = [TransportError("down")] * fails + ["ok"]
        llm = CountingLLM(outcomes)
        policy = RetryPolicy(max_retries=max_retries, sleep=no_sleep)
        if fails >= max_retries:
            with pytest.raises(GenerationError):
                generate_knowledge(REQ, llm, None, policy)
            assert llm.calls == max_retries
        else:
            assert generate_knowledge(REQ, llm, None, policy).text == "ok"
            assert llm.calls == fails + 1

    def test_rate_limit_backoff(self):
        waits = []
        policy = RetryPolicy(max_retries=4, base_delay=0.5, backoff=2.0, sleep=waits.append)
        llm = CountingLLM([RateLimitError("429")] * 10)
        with pytest.raises(GenerationError, match="rate limited"):
            generate_knowledge(REQ, llm, None, policy)
        assert waits == [0.5, 1.0, 2.0]
        assert llm.calls == 4

    def test_retry_after_respected(self):
        waits = []
        policy = RetryPolicy(max_retries=2, base_delay=0.1, sleep=waits.append)
        with pytest.raises(GenerationError):
            generate_knowledge(REQ, CountingLLM([RateLimitError("429", retry_after="3")]), None, policy)
        assert waits == [3.0]

    def test_non_retryable_error_not_retried(self):
        llm = CountingLLM([GenerationError("HTTP 400")])
        with pytest.raises(GenerationError):
            generate_knowledge(REQ, llm, None, RetryPolicy(max_retries=4, sleep=no_sleep))
        assert llm.calls == 1

    def test_empty_response(self, tmp_path):
        store = KnowledgeStore(tmp_path / "k.jsonl")
        with pytest.raises(EmptyKnowledgeError):
            generate_knowledge(REQ, CountingLLM(["   "]), store)
        assert len(store) == 0

    def test_generate_many_parallel(self, tmp_path):
        store = KnowledgeStore(tmp_path / "k.jsonl")
        reqs = [build_item_prompt(f"movie {i}", MOVIE, entity_id=str(i)) for i in range(40)]
        recs, fails = generate_many(reqs, StubLLM(), store, workers=8)
        assert len(recs) == 40 and not fails
        assert len(KnowledgeStore(tmp_path / "k.jsonl")) == 40
        assert [r.entity_id for r in recs] == [str(i) for i in range(40)]

    def test_generate_many_collects_failures(self):
        def responder(prompt):
            if "movie 3" in prompt:
                raise GenerationError("boom")
            return "fine"

        reqs = [build_item_prompt(f"movie {i}", MOVIE, entity_id=str(i)) for i in range(5)]
        recs, fails = generate_many(reqs, StubLLM(responder=responder), KnowledgeStore(),
                                    RetryPolicy(sleep=no_sleep), workers=2, on_error="skip")
        assert len(recs) == 4 and [f[0].entity_id for f in fails] == ["3"]


class _Handler(BaseHTTPRequestHandler):
    script = []  # list of (status, body) served in order; last one repeats
    seen = []

    def do_POST(self):  # noqa: N802
        n = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(n))
        type(self).seen.append({"path": self.path, "body": body,
                                "auth": self.headers.get("Authorization")})
        idx = min(len(type(self).seen) - 1, len(type(self).script) - 1)
        status, payload = type(self).script[idx]
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def mock_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    _Handler.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, _Handler
    server.shutdown()
    server.server_close()


def _completion(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


class TestHTTPClient:
    def test_live_record(self, mock_server, tmp_path, monkeypatch):
        server, handler = mock_server
        handler.script = [(200, _completion("Titanic is a 1997 romance."))]
        monkeypatch.setenv("KAR_LLM_TOKEN", "secret-token")
        client = HTTPChatClient(f"http://127.0.0.1:{server.server_port}/v1", "test-model")
        store = KnowledgeStore(tmp_path / "k.jsonl")
        rec = generate_knowledge(REQ, client, store)
        assert rec.provenance == "live_llm" and rec.text == "Titanic is a 1997 romance."
        assert store.get("7", "item_factual") == rec
        seen = handler.seen[0]
        assert seen["path"] == "/v1/chat/completions"
        assert seen["auth"] == "Bearer secret-token"
        assert seen["body"]["model"] == "test-model"
        assert seen["body"]["temperature"] == 0
        assert seen["body"]["messages"] == [{"role": "user", "content": REQ.rendered_text}]

    def test_5xx_then_success(self, mock_server):
        server, handler = mock_server
        handler.script = [(503, {}), (502, {}), (200, _completion("ok"))]
        client = HTTPChatClient(f"http://127.0.0.1:{server.server_port}", "m")
        rec = generate_knowledge(REQ, client, None, RetryPolicy(max_retries=4, sleep=no_sleep))
        assert rec.text == "ok" and len(handler.seen) == 3

    def test_429_exhausts(self, mock_server):
        server, handler = mock_server
        handler.script = [(429, {})]
        client = HTTPChatClient(f"http://127.0.0.1:{server.server_port}", "m")
        with pytest.raises(GenerationError, match="rate limited"):
            generate_knowledge(REQ, client, None, RetryPolicy(max_retries=3, sleep=no_sleep))
        assert len(handler.seen) == 3

    def test_4xx_not_retried(self, mock_server):
        server, handler = mock_server
        handler.script = [(401, {"error": "bad token"})]
        client = HTTPChatClient(f"http://127.0.0.1:{server.server_port}", "m")
        with pytest.raises(GenerationError, match="401"):
            generate_knowledge(REQ, client, None, RetryPolicy(max_retries=3, sleep=no_sleep))
        assert len(handler.seen) == 1

    def test_malformed_body(self, mock_server):
        server, handler = mock_server
        handler.script = [(200, {"unexpected": True})]
        client = HTTPChatClient(f"http://127.0.0.1:{server.server_port}", "m")
        with pytest.raises(GenerationError, match="malformed"):
            client.complete("hi")

    def test_connection_refused_is_transport(self):
        client = HTTPChatClient("http://127.0.0.1:9", "m", timeout=2)
        with pytest.raises(TransportError):
            client.complete("hi")
