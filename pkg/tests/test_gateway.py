import json
import statistics

import httpx
import pytest
from hypothesis import given, strategies as st

from homechat.clock import VirtualClock
from homechat.gateway import (
    BackendConfig,
    BackendTimeout,
    Gateway,
    HttpBackend,
    InvalidPreamble,
    MockBackend,
    ParseFailure,
    RateLimiter,
    format_response,
    mock_backend,
    parse_response,
)
from homechat.history import HistoryWindow, to_unix
from homechat.model import ActivityLabel, RoomId
from homechat.prompts import PromptBuilder


def make_bundle(users, user="5b66", activity=ActivityLabel.COOKING, room=RoomId.KITCHEN):
    builder = PromptBuilder()
    hist = HistoryWindow(user=user, from_unix=0, to_unix=2**33, episodes=(), max_lines=200)
    return builder.build(users.get(user), hist, to_unix("2024-07-26 13:59:00"), activity, room)


# Published example replies for the cooking prompt, and their scores.
TABLE1_REPLIES = [
    ("(Hello! It sounds like you're busy in the kitchen. What are you cooking today?, 80)", 80),
    ("(Cooking again? You must be a great chef! What's on the menu this time?, 80)", 80),
    ("(It's kitchen time! What delicious meal are you preparing today?, 80)", 80),
    ("(Another round in the kitchen! Are you trying a new recipe or making a favorite?, 80)", 80),
    ("(You're in the kitchen a lot today! Cooking something special?, 75)", 75),
]


class TestParseResponse:
    @pytest.mark.parametrize("raw,score", TABLE1_REPLIES)
    def test_published_examples(self, raw, score):
        text, got = parse_response(raw)
        assert got == score
        assert text and "(" not in text[:1]

    def test_scores_summary(self):
        scores = [parse_response(raw)[1] for raw, _ in TABLE1_REPLIES]
        assert scores == [80, 80, 80, 80, 75]
        assert statistics.mean(scores) == 79
        assert (min(scores), max(scores)) == (75, 80)

    def test_text_keeps_internal_commas(self):
        text, score = parse_response("(Well, well, look who's cooking, 65)")
        assert text == "Well, well, look who's cooking"
        assert score == 65

    def test_parens_optional(self):
        assert parse_response("hi there, 10") == ("hi there", 10)

    @pytest.mark.parametrize("raw", ["no comma here", "(text, 101)", "(text, -5)", "(, 50)", "(text, five)"])
    def test_rejects(self, raw):
        with pytest.raises((ParseFailure, Exception)):
            parse_response(raw)

    def test_score_boundaries(self):
        assert parse_response("(x, 0)")[1] == 0
        assert parse_response("(x, 100)")[1] == 100

    @given(
        text=st.text(
            alphabet=st.characters(blacklist_characters="()\n", codec="utf-8"),
            min_size=1,
        ).filter(lambda s: s.strip() and not s.strip().startswith("(")),
        score=st.integers(0, 100),
    )
    def test_round_trip(self, text, score):
        got_text, got_score = parse_response(format_response(text, score))
        assert (got_text, got_score) == (text.strip(), score)


class TestMockBackend:
    def test_reply_contract(self, users):
        raw = mock_backend(make_bundle(users))
        assert raw == "(Acknowledged cooking in kitchen., 50)"
        assert parse_response(raw) == ("Acknowledged cooking in kitchen.", 50)

    def test_varies_with_activity(self, users):
        raw = mock_backend(make_bundle(users, activity=ActivityLabel.TOILETING, room=RoomId.BATHROOM))
        assert raw == "(Acknowledged toileting in bathroom., 50)"


class TestRateLimiter:
    def test_never_exceeds_window_budget(self):
        clock = VirtualClock()
        limiter = RateLimiter(limit=60, clock=clock)
        stamps = [limiter.acquire() for _ in range(200)]
        assert stamps == sorted(stamps)
        for i, t in enumerate(stamps):
            in_window = [s for s in stamps[: i + 1] if t - s < 60.0]
            assert len(in_window) <= 60

    def test_first_burst_is_immediate(self):
        clock = VirtualClock()
        limiter = RateLimiter(limit=5, clock=clock)
        for _ in range(5):
            limiter.acquire()
        assert clock.now() == 0.0
        limiter.acquire()
        assert clock.now() == pytest.approx(60.0)

    def test_rejects_nonpositive_limit(self):
        with pytest.raises(ValueError):
            RateLimiter(0)


class SequenceBackend:
    """Scripted backend; raises entries that are exceptions."""

    backend_id = "seq"

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, turns, bundle):
        self.calls += 1
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


class TestGateway:
    def test_session_grows_by_two_on_success(self, users):
        gw = Gateway(MockBackend(), clock=VirtualClock())
        session = gw.open_session("5b66", PromptBuilder().init_preamble())
        assert len(session.turns) == 1
        resp = gw.send(session, make_bundle(users))
        assert len(session.turns) == 3
        assert [t.role for t in session.turns] == ["system", "user", "assistant"]
        assert resp.text == "Acknowledged cooking in kitchen."
        assert resp.score == 50

    def test_empty_preamble_rejected(self):
        gw = Gateway(MockBackend())
        with pytest.raises(InvalidPreamble):
            gw.open_session("5b66", "")

    def test_reopen_replaces_session(self, users):
        gw = Gateway(MockBackend(), clock=VirtualClock())
        first = gw.open_session("5b66", "p")
        second = gw.open_session("5b66", "p")
        assert gw.session("5b66") is second and first is not second

    def test_reask_once_on_parse_failure(self, users):
        backend = SequenceBackend(["gibberish", "(fine, 40)"])
        gw = Gateway(backend, clock=VirtualClock())
        session = gw.open_session("5b66", "p")
        resp = gw.send(session, make_bundle(users))
        assert backend.calls == 2
        assert (resp.text, resp.score) == ("fine", 40)
        # the re-ask instruction replaced the user turn, not duplicated it
        assert len(session.turns) == 3
        assert session.turns[1].content.endswith("Answer strictly as (text, score).")

    def test_parse_failure_after_reask_rolls_back(self, users):
        backend = SequenceBackend(["gibberish", "still gibberish"])
        gw = Gateway(backend, clock=VirtualClock())
        session = gw.open_session("5b66", "p")
        with pytest.raises(ParseFailure):
            gw.send(session, make_bundle(users))
        assert len(session.turns) == 1  # session unchanged after failure

    def test_retries_with_backoff_then_succeeds(self, users):
        clock = VirtualClock()
        backend = SequenceBackend([BackendTimeout("t"), BackendTimeout("t"), "(ok, 10)"])
        gw = Gateway(backend, cfg=BackendConfig(backend_id="seq", retries=2), clock=clock)
        session = gw.open_session("5b66", "p")
        resp = gw.send(session, make_bundle(users))
        assert resp.score == 10
        assert backend.calls == 3
        assert clock.now() == pytest.approx(0.5 + 1.0)  # exponential backoff

    def test_retries_exhausted_raises(self, users):
        backend = SequenceBackend([BackendTimeout("t")] * 3)
        gw = Gateway(backend, cfg=BackendConfig(backend_id="seq", retries=2), clock=VirtualClock())
        session = gw.open_session("5b66", "p")
        with pytest.raises(BackendTimeout):
            gw.send(session, make_bundle(users))
        assert len(session.turns) == 1

    def test_trace_log_written(self, users, tmp_path):
        path = tmp_path / "trace.jsonl"
        gw = Gateway(MockBackend(), clock=VirtualClock(), trace_path=path)
        session = gw.open_session("5b66", "p")
        gw.send(session, make_bundle(users))
        rec = json.loads(path.read_text().splitlines()[0])
        assert rec["response"] == "(Acknowledged cooking in kitchen., 50)"
        assert rec["request"][0]["role"] == "system"


class TestHttpBackend:
    def _cfg(self):
        return BackendConfig(
            backend_id="http-test",
            endpoint="https://backend.example/v1/chat",
            model="m-1",
        )

    def test_posts_turns_and_digs_reply(self, users, monkeypatch):
        monkeypatch.setenv("HOMECHAT_API_KEY", "sekret")
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(
                200,
                json={"choices": [{"message": {"content": "(hello from http, 66)"}}]},
            )

        backend = HttpBackend(self._cfg(), transport=httpx.MockTransport(handler))
        gw = Gateway(backend, clock=VirtualClock())
        session = gw.open_session("5b66", "p")
        resp = gw.send(session, make_bundle(users))
        assert (resp.text, resp.score) == ("hello from http", 66)
        assert resp.backend_id == "http-test"
        assert seen["auth"] == "Bearer sekret"
        assert seen["body"]["model"] == "m-1"
        assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]

    def test_transport_error_becomes_timeout(self, users):
        def handler(request):
            raise httpx.ConnectError("down")

        backend = HttpBackend(self._cfg(), transport=httpx.MockTransport(handler))
        gw = Gateway(backend, cfg=BackendConfig(backend_id="http-test", retries=0), clock=VirtualClock())
        session = gw.open_session("5b66", "p")
        with pytest.raises(BackendTimeout):
            gw.send(session, make_bundle(users))
