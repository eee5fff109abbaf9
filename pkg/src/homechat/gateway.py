"""Chat backend gateway: sessions, throttling, retries and reply parsing.

Replies must follow the ``(text, score)`` contract; the parser splits at the
last comma so the text itself may contain commas.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol

import httpx

from .clock import Clock, RealClock
from .model import (
    HomechatError,
    ScoredResponse,
    render_activity_name,
    render_room_name,
    validate_score,
)
from .prompts import PromptBundle

log = logging.getLogger(__name__)


class ParseFailure(HomechatError):
    pass


class BackendTimeout(HomechatError):
    pass


class InvalidPreamble(HomechatError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    backend_id: str = "mock"
    endpoint: str = ""
    api_key_env: str = "HOMECHAT_API_KEY"
    model: str = ""
    max_response_tokens: int = 2048
    requests_per_minute: int = 60
    timeout: float = 30.0
    retries: int = 2
    # dotted path into the response JSON that holds the reply text
    response_path: str = "choices.0.message.content"

    def __post_init__(self):
        if self.requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass
class Turn:
    role: str  # system | user | assistant
    content: str


@dataclass
class ChatSession:
    user: str
    backend_id: str
    turns: list[Turn] = field(default_factory=list)


def format_response(text: str, score: int) -> str:
    """Render the canonical ``(text, score)`` wire shape."""
    return f"({text}, {score})"


def parse_response(raw: str) -> tuple[str, int]:
    """Parse a ``(text, score)`` reply; both ``(T, N)`` and ``T, N`` accepted."""
    s = raw.strip()
    if s.startswith("(") and s.endswith(")"):
        s = s[1:-1]
    head, sep, tail = s.rpartition(",")
    if not sep:
        raise ParseFailure(f"no comma in reply: {raw!r}")
    text = head.strip()
    try:
        score = int(tail.strip())
    except ValueError:
        raise ParseFailure(f"non-integer score in reply: {raw!r}") from None
    if not text:
        raise ParseFailure(f"empty text in reply: {raw!r}")
    return text, validate_score(score)


def mock_backend(bundle: PromptBundle) -> str:
    """Deterministic test double: echoes the triggering activity and room."""
    activity = render_activity_name(bundle.meta.activity)
    room = render_room_name(bundle.meta.room)
    return f"(Acknowledged {activity} in {room}., 50)"


class Backend(Protocol):
    backend_id: str

    def complete(self, turns: list[Turn], bundle: PromptBundle) -> str: ...


class MockBackend:
    backend_id = "mock"

    def complete(self, turns: list[Turn], bundle: PromptBundle) -> str:
        return mock_backend(bundle)


def _dig(obj, dotted: str):
    for key in dotted.split("."):
        if isinstance(obj, list):
            obj = obj[int(key)]
        else:
            obj = obj[key]
    return obj


class HttpBackend:
    """Generic HTTP-JSON chat-completion adapter, fully driven by config."""

    def __init__(self, cfg: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self.backend_id = cfg.backend_id
        headers = {}
        api_key = os.environ.get(cfg.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            timeout=cfg.timeout, headers=headers, transport=transport
        )

    def complete(self, turns: list[Turn], bundle: PromptBundle) -> str:
        body = {
            "model": self.cfg.model,
            "max_tokens": self.cfg.max_response_tokens,
            "messages": [{"role": t.role, "content": t.content} for t in turns],
        }
        try:
            resp = self._client.post(self.cfg.endpoint, json=body)
            resp.raise_for_status()
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise BackendTimeout(str(exc)) from exc
        return str(_dig(resp.json(), self.cfg.response_path))


class RateLimiter:
    """Sliding-window throttle: at most `limit` dispatches in any 60 s window."""

    WINDOW = 60.0

    def __init__(self, limit: int, clock: Clock | None = None):
        if limit <= 0:
            raise ValueError("limit must be > 0")
        self.limit = limit
        self.clock = clock if clock is not None else RealClock()
        self._dispatches: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Block (possibly in virtual time) until a slot is free; returns dispatch time."""
        with self._lock:
            while True:
                now = self.clock.now()
                while self._dispatches and now - self._dispatches[0] >= self.WINDOW:
                    self._dispatches.popleft()
                if len(self._dispatches) < self.limit:
                    self._dispatches.append(now)
                    return now
                self.clock.sleep(self._dispatches[0] + self.WINDOW - now)


_REASK_INSTRUCTION = "Answer strictly as (text, score)."


class Gateway:
    """One live session per user; serialized sends per user, shared throttle."""

    def __init__(
        self,
        backend: Backend,
        cfg: BackendConfig | None = None,
        clock: Clock | None = None,
        trace_path: str | Path | None = None,
    ):
        self.backend = backend
        self.cfg = cfg if cfg is not None else BackendConfig(backend_id=backend.backend_id)
        self.clock = clock if clock is not None else RealClock()
        self.limiter = RateLimiter(self.cfg.requests_per_minute, self.clock)
        self._sessions: dict[str, ChatSession] = {}
        self._user_locks: dict[str, threading.Lock] = {}
        self._trace_path = Path(trace_path) if trace_path else None

    def open_session(self, user: str, preamble: str) -> ChatSession:
        if not preamble:
            raise InvalidPreamble("system preamble must be non-empty")
        session = ChatSession(
            user=user,
            backend_id=self.backend.backend_id,
            turns=[Turn("system", preamble)],
        )
        self._sessions[user] = session  # replaces any prior live session
        self._user_locks.setdefault(user, threading.Lock())
        return session

    def session(self, user: str) -> Optional[ChatSession]:
        return self._sessions.get(user)

    def send(self, session: ChatSession, bundle: PromptBundle) -> ScoredResponse:
        lock = self._user_locks.setdefault(session.user, threading.Lock())
        with lock:
            return self._send_locked(session, bundle)

    def _send_locked(self, session: ChatSession, bundle: PromptBundle) -> ScoredResponse:
        session.turns.append(Turn("user", bundle.user_turn))
        t0 = self.clock.now()
        try:
            raw = self._transmit(session.turns, bundle)
            try:
                text, score = parse_response(raw)
            except ParseFailure:
                log.warning("unparseable reply %r; re-asking once", raw)
                session.turns[-1] = Turn(
                    "user", bundle.user_turn + "\n" + _REASK_INSTRUCTION
                )
                raw = self._transmit(session.turns, bundle)
                try:
                    text, score = parse_response(raw)
                except ParseFailure:
                    log.error("reply unparseable after re-ask: %r", raw)
                    raise
        except Exception:
            session.turns.pop()  # failed send leaves the session unchanged
            raise
        latency_ms = max(0, int((self.clock.now() - t0) * 1000))
        session.turns.append(Turn("assistant", raw))
        return ScoredResponse(
            text=text,
            score=score,
            backend_id=self.backend.backend_id,
            latency_ms=latency_ms,
        )

    def _transmit(self, turns: list[Turn], bundle: PromptBundle) -> str:
        self.limiter.acquire()
        delay = 0.5
        attempt = 0
        while True:
            try:
                raw = self.backend.complete(turns, bundle)
                self._trace(turns, raw)
                return raw
            except BackendTimeout:
                attempt += 1
                if attempt > self.cfg.retries:
                    raise
                self.clock.sleep(delay)
                delay *= 2

    def _trace(self, turns: list[Turn], raw: str) -> None:
        if self._trace_path is None:
            return
        rec = {
            "request": [{"role": t.role, "content": t.content} for t in turns],
            "response": raw,
        }
        with open(self._trace_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec) + "\n")
