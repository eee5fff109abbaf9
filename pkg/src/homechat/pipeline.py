"""Wires ingestion -> localization -> recognition -> history -> prompts -> gateway.

The pipeline owns all per-user mutable state and is driven by a single
consumer feeding it one merged, timestamp-ordered event at a time.  In
replay mode "now" is always the event timestamp, never wall time.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from .gateway import Gateway, ParseFailure
from .har import (
    BoundaryEvent,
    BoundaryKind,
    InstantLabel,
    RuleConfig,
    RuleEngine,
    SensorWindow,
    StreamSegmenter,
)
from .history import ContextQueue
from .ingest import Event
from .localize import (
    DEFAULT_DECAY,
    FloorPlan,
    OccupancyGrid,
    UserState,
    update_heatmap,
    update_user_state,
)
from .model import (
    ActivityEpisode,
    SensorEvent,
    SensorRegistry,
    UserPosition,
    UserRegistry,
)
from .prompts import PromptBuilder

log = logging.getLogger(__name__)

DEFAULT_LOOKBACK = 48 * 3600
DEFAULT_MAX_LINES = 200

#: score recorded when the backend reply stayed unparseable; excluded from stats
PARSE_FAILURE_SCORE = -1


@dataclass(frozen=True)
class InteractionRecord:
    ts: int  # start of the episode that triggered the prompt
    user: str
    activity: str
    room: str
    prompt_chars: int
    response_text: str
    score: int
    backend_id: str
    latency_ms: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


class Pipeline:
    def __init__(
        self,
        users: UserRegistry,
        sensors: SensorRegistry,
        plan: FloorPlan,
        gateway: Gateway,
        builder: PromptBuilder | None = None,
        rules: RuleConfig | None = None,
        lookback: int = DEFAULT_LOOKBACK,
        max_lines: int = DEFAULT_MAX_LINES,
        cooldown: int = 0,
        log_path: str | Path | None = None,
        instant_sink: Optional[Callable[[InstantLabel], None]] = None,
    ):
        self.users = users
        self.sensors = sensors
        self.plan = plan
        self.gateway = gateway
        self.builder = builder if builder is not None else PromptBuilder()
        self.rules = rules if rules is not None else RuleConfig()
        self.engine = RuleEngine(plan, sensors, users, self.rules)
        self.lookback = lookback
        self.max_lines = max_lines
        self.cooldown = cooldown
        self.queue = ContextQueue()
        horizon = max(
            self.rules.humidity_window,
            self.rules.cook_min,
            self.rules.appliance_window,
            self.rules.exit_window,
        ) + 60
        self.window = SensorWindow(horizon=horizon)
        self.states: dict[str, UserState] = {
            p.tag_id: UserState(tag_id=p.tag_id) for p in users
        }
        self.heatmaps: dict[str, OccupancyGrid] = {
            p.tag_id: OccupancyGrid.empty(plan) for p in users
        }
        self.segmenters: dict[str, StreamSegmenter] = {
            p.tag_id: StreamSegmenter(p.tag_id, self.rules) for p in users
        }
        self.current_activity: dict[str, Optional[ActivityEpisode]] = {
            p.tag_id: None for p in users
        }
        self.interactions: list[InteractionRecord] = []
        self.diagnostics = {"skipped_events": 0, "parse_failures": 0, "dropped_fixes": 0}
        self._last_prompt_ts: dict[str, int] = {}
        self._log_path = Path(log_path) if log_path else None
        self.instant_sink = instant_sink
        self._last_ts: Optional[int] = None

    # -- event handling ----------------------------------------------------

    def handle(self, event: Event) -> list[InteractionRecord]:
        """Fold one merged-stream event; returns interactions it triggered."""
        if isinstance(event, UserPosition):
            if event.tag_id not in self.users:
                self.diagnostics["skipped_events"] += 1
                log.warning("position for unknown tag %s skipped", event.tag_id)
                return []
            state = self.states[event.tag_id]
            new_state = update_user_state(state, event, self.plan)
            if new_state is state and state.last_position is not None:
                # out-of-order fix: dropped, and time must not run backwards
                self.diagnostics["dropped_fixes"] += 1
                return []
            self.states[event.tag_id] = new_state
            self.heatmaps[event.tag_id] = update_heatmap(
                self.heatmaps[event.tag_id], event, DEFAULT_DECAY
            )
        elif isinstance(event, SensorEvent):
            if event.sensor_id not in self.sensors:
                self.diagnostics["skipped_events"] += 1
                log.warning("event for unknown sensor %s skipped", event.sensor_id)
                return []
            self.window.add(event.ts, event.sensor_id, event.value)
        else:
            raise TypeError(f"unexpected event {event!r}")
        self._last_ts = event.ts
        return self._evaluate(event.ts)

    def _evaluate(self, now: int) -> list[InteractionRecord]:
        out: list[InteractionRecord] = []
        for profile in self.users:
            tag = profile.tag_id
            inst = self.engine.classify_instant(self.states[tag], self.window, now)
            if self.instant_sink is not None:
                self.instant_sink(inst)
            for boundary in self.segmenters[tag].feed(inst):
                rec = self._on_boundary(boundary)
                if rec is not None:
                    out.append(rec)
        return out

    def tick(self, now: int) -> list[InteractionRecord]:
        """Re-evaluate all users without a new event (live-mode heartbeat)."""
        if self._last_ts is not None and now < self._last_ts:
            return []
        self._last_ts = now
        return self._evaluate(now)

    def finish(self, final_ts: Optional[int] = None) -> list[InteractionRecord]:
        """End of stream: flush segmenters so trailing episodes surface."""
        ts = final_ts if final_ts is not None else self._last_ts
        out: list[InteractionRecord] = []
        for profile in self.users:
            for boundary in self.segmenters[profile.tag_id].flush(ts):
                rec = self._on_boundary(boundary)
                if rec is not None:
                    out.append(rec)
        return out

    # -- boundaries and prompting -----------------------------------------

    def trigger_policy(self, boundary: BoundaryEvent) -> bool:
        """Prompt exactly on episode starts, debounced by the cooldown."""
        if boundary.kind is not BoundaryKind.STARTED:
            return False
        last = self._last_prompt_ts.get(boundary.episode.user)
        if last is not None and self.cooldown > 0:
            if boundary.episode.start - last < self.cooldown:
                return False
        return True

    def _on_boundary(self, boundary: BoundaryEvent) -> Optional[InteractionRecord]:
        ep = boundary.episode
        if boundary.kind is BoundaryKind.ENDED:
            self.queue.push(ep.user, ep)
            current = self.current_activity.get(ep.user)
            if current is not None and current.start == ep.start:
                self.current_activity[ep.user] = None
            return None
        should = self.trigger_policy(boundary)
        self.queue.push(ep.user, ep)  # open episode enters the queue at start
        self.current_activity[ep.user] = ep
        if not should:
            return None
        self._last_prompt_ts[ep.user] = ep.start
        return self._prompt(ep)

    def _prompt(self, ep: ActivityEpisode) -> InteractionRecord:
        profile = self.users.get(ep.user)
        hist = self.queue.window(ep.user, ep.start, self.lookback, self.max_lines)
        bundle = self.builder.build(profile, hist, ep.start, ep.activity, ep.room)
        session = self.gateway.session(ep.user)
        if session is None:
            session = self.gateway.open_session(ep.user, bundle.system_preamble)
        try:
            resp = self.gateway.send(session, bundle)
            record = InteractionRecord(
                ts=ep.start,
                user=ep.user,
                activity=ep.activity.value,
                room=ep.room.value,
                prompt_chars=len(bundle.user_turn),
                response_text=resp.text,
                score=resp.score,
                backend_id=resp.backend_id,
                latency_ms=resp.latency_ms,
            )
        except ParseFailure:
            self.diagnostics["parse_failures"] += 1
            record = InteractionRecord(
                ts=ep.start,
                user=ep.user,
                activity=ep.activity.value,
                room=ep.room.value,
                prompt_chars=len(bundle.user_turn),
                response_text="",
                score=PARSE_FAILURE_SCORE,
                backend_id=self.gateway.backend.backend_id,
                latency_ms=0,
            )
        self.interactions.append(record)
        self._append_log(record)
        return record

    def _append_log(self, record: InteractionRecord) -> None:
        if self._log_path is None:
            return
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")

    # -- batch driver ------------------------------------------------------

    def run(self, events: Iterable[Event]) -> list[InteractionRecord]:
        """Consume a finite event stream to EOF, flushing at the end."""
        for event in events:
            self.handle(event)
        self.finish()
        return self.interactions
