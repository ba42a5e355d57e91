"""Completion-boundary tests: prompts, the mock client, and HTTP retries.

The remote-client tests run against a local http.server stub scripted per
test, with the retry sleep injected so nothing actually waits.
"""
import json
import logging
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from nsg.corpus import NewsFragment
from nsg.event_model import EventPattern
from nsg.gateway import (
    DEFAULT_EXEMPLARS,
    DEFAULT_PARAMS,
    ContextExemplar,
    ExhaustedRetries,
    GatewayError,
    GatewayTimeout,
    GenerationParams,
    MockCompletionClient,
    NoValidPatterns,
    RemoteCompletionClient,
    RemoteError,
    SummaryRecord,
    build_direct_prompt,
    build_extraction_prompt,
    build_summary_prompt,
    extract_patterns,
    generate_digest,
    generate_summary,
    generate_summary_direct,
    summary_record_from_dict,
)
from nsg.event_model import serialize_pattern


def fragment(body, id="frag-1", title="headline"):
    return NewsFragment(id=id, title=title, body=body)


class ScriptedClient:
    """Replays canned completions; the last reply repeats."""

    provenance = "llm"

    def __init__(self, *replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, prompt, params=DEFAULT_PARAMS):
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


class CountingClient:
    def __init__(self, inner):
        self.inner = inner
        self.provenance = inner.provenance
        self.calls = 0

    def complete(self, prompt, params=DEFAULT_PARAMS):
        self.calls += 1
        return self.inner.complete(prompt, params)


class TestGenerationParams:
    def test_defaults(self):
        assert DEFAULT_PARAMS == GenerationParams(256, 0.0, 30.0, 2)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_tokens": 0},
            {"temperature": -0.1},
            {"timeout": 0.0},
            {"retries": -1},
            {"retries": 6},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GenerationParams(**kwargs)


class TestSummaryRecord:
    def test_guided_record_round_trips(self):
        pattern = EventPattern("flood", ("city", "date"))
        record = SummaryRecord("f1", "nsg", "text", guiding_pattern=pattern)
        assert summary_record_from_dict(record.to_dict()) == record

    def test_unguided_record_round_trips(self):
        record = SummaryRecord("f1", "glm_direct", "text")
        payload = record.to_dict()
        assert "guiding_pattern" not in payload
        assert summary_record_from_dict(payload) == record

    def test_unknown_system_rejected(self):
        with pytest.raises(ValueError):
            SummaryRecord("f1", "gpt", "text")

    def test_blank_summary_rejected(self):
        with pytest.raises(ValueError):
            SummaryRecord("f1", "glm_direct", "   ")

    def test_pattern_required_iff_nsg(self):
        pattern = EventPattern("flood", ("city",))
        with pytest.raises(ValueError):
            SummaryRecord("f1", "nsg", "text")
        with pytest.raises(ValueError):
            SummaryRecord("f1", "glm_direct", "text", guiding_pattern=pattern)


class TestPrompts:
    def test_extraction_prompt_contains_exemplars_and_body(self):
        frag = fragment("A dam burst upstream. Villages flooded quickly.")
        prompt = build_extraction_prompt(frag, DEFAULT_EXEMPLARS, 8)
        for exemplar in DEFAULT_EXEMPLARS:
            assert exemplar.event_text in prompt
            assert serialize_pattern(exemplar.pattern) in prompt
        assert "at most 8 patterns" in prompt
        assert prompt.endswith("News text:\n" + frag.body)

    def test_summary_prompt_carries_pattern(self):
        frag = fragment("A dam burst upstream.")
        pattern = EventPattern("flood", ("place", "cause"))
        prompt = build_summary_prompt(frag, pattern)
        assert "Type: flood; Arguments: cause, place" in prompt
        assert frag.body in prompt

    def test_direct_prompt_has_no_pattern_line(self):
        frag = fragment("A dam burst upstream.")
        prompt = build_direct_prompt(frag)
        assert "Arguments" not in prompt
        assert frag.body in prompt

    def test_exemplar_requires_text(self):
        with pytest.raises(ValueError):
            ContextExemplar("   ", EventPattern("t", ("a",)))


class TestMockClient:
    def test_pure_function_of_prompt(self):
        client = MockCompletionClient(seed=3)
        frag = fragment("The mayor opened the bridge. Crowds cheered the mayor loudly.")
        prompt = build_extraction_prompt(frag, DEFAULT_EXEMPLARS, 8)
        assert client.complete(prompt) == client.complete(prompt)
        assert client.complete(prompt) == MockCompletionClient(seed=3).complete(prompt)

    def test_extraction_rule_type_and_roles(self):
        # all content words tie at one occurrence, so the type is the
        # lexicographic minimum and roles keep sentence order
        client = MockCompletionClient()
        frag = fragment("The mayor opened the bridge.")
        reply = client.complete(build_extraction_prompt(frag, DEFAULT_EXEMPLARS, 8))
        assert reply == "Type: bridge; Arguments: mayor, opened"

    def test_extraction_rule_commonest_word_wins(self):
        client = MockCompletionClient()
        frag = fragment("Storms battered the coast as storms grew.")
        reply = client.complete(build_extraction_prompt(frag, DEFAULT_EXEMPLARS, 8))
        assert reply == "Type: storms; Arguments: battered, coast, grew"

    def test_extraction_role_cap(self):
        client = MockCompletionClient()
        frag = fragment("Auditors flagged irregular payments involving vendors, brokers, couriers and clerks.")
        reply = client.complete(build_extraction_prompt(frag, DEFAULT_EXEMPLARS, 8))
        head, _, role_text = reply.partition("; Arguments: ")
        assert len(role_text.split(", ")) == 5

    def test_one_pattern_per_sentence(self):
        client = MockCompletionClient()
        frag = fragment(
            "Rivers rose overnight. Farmers moved livestock uphill."
            " Officials closed two roads. Rain kept falling."
        )
        reply = client.complete(build_extraction_prompt(frag, DEFAULT_EXEMPLARS, 8))
        assert len(reply.splitlines()) == 4

    def test_guided_summary_template(self):
        client = MockCompletionClient()
        frag = fragment("Rivers rose fast. Rain fell.")
        pattern = EventPattern("flood", ("city", "date"))
        reply = client.complete(build_summary_prompt(frag, pattern))
        assert reply == "flood: city, date — Rivers rose fast."

    def test_direct_summary_template(self):
        client = MockCompletionClient()
        frag = fragment("Rivers rose fast. Rain fell.")
        assert client.complete(build_direct_prompt(frag)) == "Summary: Rivers rose fast."

    def test_unrecognized_prompt_echoes_first_sentence(self):
        client = MockCompletionClient()
        assert client.complete("Tell me anything. Second thought.") == "Tell me anything."


class TestExtractPatterns:
    def test_mock_extraction_end_to_end(self):
        client = MockCompletionClient()
        frag = fragment(
            "Rivers rose overnight. Farmers moved livestock uphill."
            " Officials closed two roads. Rain kept falling."
        )
        patterns = extract_patterns(client, frag, per_fragment_target=6)
        assert len(patterns) == 4
        assert all(p.origin == "mock" for p in patterns)

    def test_truncated_to_target(self):
        client = MockCompletionClient()
        frag = fragment(
            "Rivers rose overnight. Farmers moved livestock uphill."
            " Officials closed two roads. Rain kept falling."
        )
        patterns = extract_patterns(client, frag, per_fragment_target=2)
        assert len(patterns) == 2

    def test_duplicates_collapsed(self):
        reply = "Type: flood; Arguments: city\nType: flood; Arguments: city"
        patterns = extract_patterns(ScriptedClient(reply), fragment("Water rose."))
        assert len(patterns) == 1

    def test_garbage_lines_skipped(self):
        reply = "nonsense first line\nType: attack; Arguments: attacker, city\n???"
        patterns = extract_patterns(ScriptedClient(reply), fragment("Text here."))
        assert patterns == [EventPattern("attack", ("attacker", "city"), origin="llm")]

    def test_reasks_once_then_gives_up(self):
        # a body of pure stopwords defeats the mock extractor
        client = CountingClient(MockCompletionClient())
        frag = fragment("Of the and. In a the.")
        with pytest.raises(NoValidPatterns):
            extract_patterns(client, frag)
        assert client.calls == 2

    def test_reask_can_succeed(self):
        client = CountingClient(ScriptedClient("", "Type: flood; Arguments: city"))
        patterns = extract_patterns(client, fragment("Water rose."))
        assert client.calls == 2
        assert patterns[0].event_type == "flood"

    def test_target_validated(self):
        with pytest.raises(ValueError):
            extract_patterns(MockCompletionClient(), fragment("Text."), per_fragment_target=0)


class TestGenerateSummaries:
    def test_guided_summary_record(self):
        frag = fragment("Rivers rose fast. Rain fell.")
        pattern = EventPattern("flood", ("city", "date"))
        record = generate_summary(MockCompletionClient(), frag, pattern)
        assert record.system == "nsg"
        assert record.guiding_pattern == pattern
        assert record.summary == "flood: city, date — Rivers rose fast."

    def test_direct_summary_record(self):
        frag = fragment("Rivers rose fast. Rain fell.")
        record = generate_summary_direct(MockCompletionClient(), frag)
        assert record.system == "glm_direct"
        assert record.guiding_pattern is None
        assert record.summary == "Summary: Rivers rose fast."

    def test_whitespace_normalized(self):
        record = generate_summary_direct(ScriptedClient("  spaced\n\nout  reply "), fragment("Text."))
        assert record.summary == "spaced out reply"

    def test_empty_completion_raises(self):
        with pytest.raises(GatewayError):
            generate_summary_direct(ScriptedClient("   "), fragment("Text."))

    def test_digest_lists_event_types(self):
        patterns = [
            EventPattern("flood", ("city",)),
            EventPattern("storm", ("coast",)),
            EventPattern("flood", ("river",)),
        ]
        assert generate_digest(MockCompletionClient(), patterns) == "Digest: flood, storm"

    def test_digest_requires_patterns(self):
        with pytest.raises(ValueError):
            generate_digest(MockCompletionClient(), [])


def completion_body(text):
    return json.dumps({"choices": [{"message": {"content": text}}]})


class _StubState:
    def __init__(self, script):
        self.script = script
        self.requests = []
        self.lock = threading.Lock()
        self.active = 0
        self.max_active = 0


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        state = self.server.state
        with state.lock:
            index = len(state.requests)
            length = int(self.headers.get("Content-Length", "0"))
            state.requests.append(
                {
                    "path": self.path,
                    "headers": {k: v for k, v in self.headers.items()},
                    "json": json.loads(self.rfile.read(length) or b"{}"),
                }
            )
            state.active += 1
            state.max_active = max(state.max_active, state.active)
        try:
            step = state.script[min(index, len(state.script) - 1)]
            if step.get("delay"):
                time.sleep(step["delay"])
            payload = step["body"].encode("utf-8")
            self.send_response(step["status"])
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        except OSError:
            pass  # client hung up first (timeout tests)
        finally:
            with state.lock:
                state.active -= 1

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    started = []

    def start(script):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        server.state = _StubState(script)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        started.append((server, thread))
        url = "http://127.0.0.1:%d/v1/chat/completions" % server.server_address[1]
        return url, server.state

    yield start
    for server, thread in started:
        server.shutdown()
        server.server_close()
        thread.join(timeout=2)


def make_client(url, **kwargs):
    sleeps = []
    kwargs.setdefault("api_key", None)
    client = RemoteCompletionClient(url, "test-model", sleep=sleeps.append, **kwargs)
    return client, sleeps


def wait_for_requests(state, n, deadline=2.0):
    end = time.time() + deadline
    while len(state.requests) < n and time.time() < end:
        time.sleep(0.01)


class TestRemoteClient:
    def test_successful_completion(self, stub_server):
        url, state = stub_server([{"status": 200, "body": completion_body("the reply")}])
        client, sleeps = make_client(url)
        assert client.complete("hello prompt") == "the reply"
        assert len(state.requests) == 1
        assert sleeps == []
        sent = state.requests[0]["json"]
        assert sent["model"] == "test-model"
        assert sent["messages"] == [{"role": "user", "content": "hello prompt"}]
        assert sent["max_tokens"] == DEFAULT_PARAMS.max_tokens
        assert sent["temperature"] == DEFAULT_PARAMS.temperature

    def test_retries_transient_500_with_backoff(self, stub_server):
        url, state = stub_server(
            [
                {"status": 500, "body": "boom"},
                {"status": 503, "body": "busy"},
                {"status": 200, "body": completion_body("recovered")},
            ]
        )
        client, sleeps = make_client(url)
        params = GenerationParams(retries=2)
        assert client.complete("p", params) == "recovered"
        assert len(state.requests) == 3
        assert sleeps == [0.5, 1.0]

    def test_exhausted_retries_counts_requests(self, stub_server):
        url, state = stub_server([{"status": 500, "body": "down"}])
        client, sleeps = make_client(url)
        with pytest.raises(ExhaustedRetries) as info:
            client.complete("p", GenerationParams(retries=1))
        assert len(state.requests) == 2
        assert sleeps == [0.5]
        assert "HTTP 500" in str(info.value)

    def test_zero_retries_fails_on_first_error(self, stub_server):
        url, state = stub_server([{"status": 502, "body": "bad"}])
        client, sleeps = make_client(url)
        with pytest.raises(ExhaustedRetries):
            client.complete("p", GenerationParams(retries=0))
        assert len(state.requests) == 1
        assert sleeps == []

    def test_client_error_fails_immediately(self, stub_server):
        url, state = stub_server([{"status": 404, "body": "no such model"}])
        client, sleeps = make_client(url)
        with pytest.raises(RemoteError) as info:
            client.complete("p", GenerationParams(retries=3))
        assert info.value.status == 404
        assert len(state.requests) == 1
        assert sleeps == []

    def test_malformed_bodies_fail_immediately(self, stub_server):
        non_string_content = json.dumps({"choices": [{"message": {"content": 42}}]})
        for body in ("not json", json.dumps({"choices": []}), non_string_content):
            url, state = stub_server([{"status": 200, "body": body}])
            client, _ = make_client(url)
            with pytest.raises(RemoteError):
                client.complete("p", GenerationParams(retries=2))
            assert len(state.requests) == 1

    def test_timeouts_raise_gateway_timeout(self, stub_server):
        url, state = stub_server(
            [{"status": 200, "body": completion_body("late"), "delay": 0.5}]
        )
        client, sleeps = make_client(url)
        with pytest.raises(GatewayTimeout):
            client.complete("p", GenerationParams(timeout=0.05, retries=1))
        wait_for_requests(state, 2)
        assert len(state.requests) == 2
        assert sleeps == [0.5]

    def test_connection_errors_retry_then_exhaust(self):
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        sleeps = []
        client = RemoteCompletionClient(
            "http://127.0.0.1:%d/v1" % port, "m", sleep=sleeps.append
        )
        with pytest.raises(ExhaustedRetries):
            client.complete("p", GenerationParams(retries=2))
        assert sleeps == [0.5, 1.0]

    def test_api_key_sent_but_never_logged(self, stub_server, caplog):
        url, state = stub_server([{"status": 200, "body": completion_body("ok")}])
        sleeps = []
        client = RemoteCompletionClient(
            url, "test-model", api_key="sk-secret-123", sleep=sleeps.append
        )
        with caplog.at_level(logging.DEBUG, logger="nsg.gateway"):
            client.complete("p")
        assert state.requests[0]["headers"]["Authorization"] == "Bearer sk-secret-123"
        assert "sk-secret-123" not in caplog.text
        assert "Bearer ***" in caplog.text

    def test_concurrency_capped_by_semaphore(self, stub_server):
        url, state = stub_server(
            [{"status": 200, "body": completion_body("ok"), "delay": 0.05}]
        )
        client, _ = make_client(url, max_concurrency=2)
        threads = [
            threading.Thread(target=client.complete, args=("p%d" % i,)) for i in range(8)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=5)
        assert len(state.requests) == 8
        assert 1 <= state.max_active <= 2

    def test_backoff_base_scales_sleeps(self, stub_server):
        url, _ = stub_server([{"status": 500, "body": "down"}])
        sleeps = []
        client = RemoteCompletionClient(
            url, "m", backoff_base=0.2, sleep=sleeps.append
        )
        with pytest.raises(ExhaustedRetries):
            client.complete("p", GenerationParams(retries=2))
        assert sleeps == pytest.approx([0.2, 0.4])

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"endpoint": "", "model": "m"},
            {"endpoint": "http://x", "model": ""},
            {"endpoint": "http://x", "model": "m", "max_concurrency": 0},
            {"endpoint": "http://x", "model": "m", "backoff_base": 0.0},
        ],
    )
    def test_constructor_validation(self, kwargs):
        with pytest.raises(ValueError):
            RemoteCompletionClient(**kwargs)
