"""Knowledge-based activity recognition and episode segmentation.

Eight activities are recognized per user from the current location state and
a short window of recent sensor events, by crisp threshold rules applied in
a fixed priority order.  Instant labels are then segmented into episodes
with gap merging and minimum-duration filtering.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .localize import (
    FloorPlan,
    UserState,
    distance_to,
    in_exit_zone,
    proximity,
)
from .model import (
    ActivityEpisode,
    ActivityLabel,
    HomechatError,
    RoomId,
    SensorKind,
    SensorRegistry,
    SensorSpec,
    UserProfile,
    UserRegistry,
    room_for_activity,
)


class UnsortedInput(HomechatError):
    pass


@dataclass(frozen=True)
class RuleConfig:
    """All recognition and segmentation thresholds in one place."""

    proximity_radius: float = 1.5  # m
    humidity_delta: float = 0.15  # normalized units
    humidity_window: int = 300  # s
    power_threshold: float = 0.2  # normalized
    rest_min: int = 180  # s stationary before Resting
    sleep_min: int = 900  # s stationary before Sleeping
    cook_min: int = 120  # s of sustained stove/microwave for Cooking
    merge_gap: int = 60  # s
    min_episode: int = 60  # s
    exit_window: int = 60  # s after a door-contact event
    appliance_window: int = 60  # s a kitchen interaction stays "recent"

    def __post_init__(self):
        for name in (
            "proximity_radius",
            "humidity_delta",
            "humidity_window",
            "power_threshold",
            "rest_min",
            "sleep_min",
            "cook_min",
            "merge_gap",
            "min_episode",
            "exit_window",
            "appliance_window",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sleep_min <= self.rest_min:
            raise ValueError("sleep_min must exceed rest_min")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RuleConfig":
        known = {k: v for k, v in mapping.items() if k in cls.__dataclass_fields__}
        numeric = {
            k: (float(v) if "." in str(v) or k in ("proximity_radius", "humidity_delta", "power_threshold") else int(v))
            for k, v in known.items()
        }
        return cls(**numeric)


@dataclass(frozen=True)
class InstantLabel:
    ts: int
    user: str
    label: Optional[ActivityLabel]
    evidence: tuple[str, ...] = ()
    room: Optional[RoomId] = None  # episode room; canonical unless ComputerUse elsewhere

    def __post_init__(self):
        if self.label is not None and not self.evidence:
            raise ValueError("labeled instant needs evidence")


class SensorWindow:
    """Rolling per-sensor buffer of recent normalized events."""

    def __init__(self, horizon: int = 900):
        self.horizon = horizon
        self._events: dict[str, deque] = {}
        self._last_active: dict[str, int] = {}

    def add(self, ts: int, sensor_id: str, value: float) -> None:
        dq = self._events.setdefault(sensor_id, deque())
        dq.append((ts, value))
        if value >= 0.5:
            self._last_active[sensor_id] = ts
        self._trim(dq, ts)

    def last_active_ts(self, sensor_id: str) -> Optional[int]:
        """Time of the most recent active (>= 0.5) reading, never trimmed."""
        return self._last_active.get(sensor_id)

    def _trim(self, dq: deque, now: int) -> None:
        while dq and now - dq[0][0] > self.horizon:
            dq.popleft()

    def latest(self, sensor_id: str) -> Optional[tuple[int, float]]:
        dq = self._events.get(sensor_id)
        return dq[-1] if dq else None

    def active_since(self, sensor_id: str, now: int, threshold: float = 0.5) -> Optional[int]:
        """Start ts of the uninterrupted run of >=threshold readings ending now.

        Binary sensors publish edges only, so the latest reading's state is
        taken to persist until contradicted.
        """
        dq = self._events.get(sensor_id)
        if not dq or dq[-1][1] < threshold:
            return None
        start = None
        for ts, value in reversed(dq):
            if value < threshold:
                break
            start = ts
        return start

    def last_active_within(
        self, sensor_id: str, now: int, window: int, threshold: float = 0.5
    ) -> Optional[int]:
        dq = self._events.get(sensor_id)
        if not dq:
            return None
        for ts, value in reversed(dq):
            if now - ts > window:
                break
            if value >= threshold:
                return ts
        return None

    def rise_within(self, sensor_id: str, now: int, window: int) -> float:
        """Max increase from any reading in the window to the latest reading."""
        dq = self._events.get(sensor_id)
        if not dq:
            return 0.0
        latest = dq[-1][1]
        lows = [v for ts, v in dq if now - ts <= window]
        if not lows:
            return 0.0
        return latest - min(lows)


# Semantic roles inferred from sensor ids; the fixture registry follows this
# naming convention and custom registries must too.
_ROLE_KEYWORDS = {
    "entry_door": ("entry", "front_door", "main_door"),
    "stove": ("stove", "oven", "hob"),
    "microwave": ("microwave",),
    "fridge": ("fridge", "refrigerator"),
    "sink": ("sink",),
    "toilet": ("toilet",),
    "faucet": ("faucet", "tap"),
    "workstation": ("workstation", "computer", "_pc_"),
}


def sensor_roles(registry: SensorRegistry) -> dict[str, list[SensorSpec]]:
    roles: dict[str, list[SensorSpec]] = {role: [] for role in _ROLE_KEYWORDS}
    roles["bathroom_humidity"] = []
    for spec in registry:
        sid = spec.sensor_id.lower()
        for role, keywords in _ROLE_KEYWORDS.items():
            if any(k in sid for k in keywords):
                roles[role].append(spec)
        if spec.kind is SensorKind.HUMIDITY and spec.room is RoomId.BATHROOM:
            roles["bathroom_humidity"].append(spec)
    return roles


class RuleEngine:
    """Applies the recognition rules for every known user."""

    # priority order; first satisfied rule wins
    PRIORITY = (
        ActivityLabel.EXIT,
        ActivityLabel.SHOWERING,
        ActivityLabel.TOILETING,
        ActivityLabel.COOKING,
        ActivityLabel.KITCHEN_ACTIVITY,
        ActivityLabel.COMPUTER_USE,
        ActivityLabel.SLEEPING,
        ActivityLabel.RESTING,
    )

    def __init__(
        self,
        plan: FloorPlan,
        sensors: SensorRegistry,
        users: UserRegistry,
        cfg: RuleConfig | None = None,
    ):
        self.plan = plan
        self.sensors = sensors
        self.users = users
        self.cfg = cfg if cfg is not None else RuleConfig()
        self.roles = sensor_roles(sensors)

    def _near(self, state: UserState, spec: SensorSpec) -> bool:
        if state.last_position is None:
            return False
        _, near = proximity(state.last_position, spec, self.cfg.proximity_radius)
        return near

    def _near_poi(self, state: UserState, name: str) -> bool:
        point = self.plan.poi(name)
        if point is None or state.last_position is None:
            return False
        return distance_to(state.last_position, point) <= self.cfg.proximity_radius

    def classify_instant(
        self, state: UserState, window: SensorWindow, now: int
    ) -> InstantLabel:
        """Label one user at one instant; None when no rule fires."""
        cfg = self.cfg
        profile = self.users.get(state.tag_id)
        pos = state.last_position

        def made(label: ActivityLabel, evidence: list[str], room: RoomId | None = None):
            return InstantLabel(
                ts=now,
                user=state.tag_id,
                label=label,
                evidence=tuple(evidence),
                room=room if room is not None else room_for_activity(label, profile),
            )

        # Exit: entry-door contact with the user at the door or their fixes
        # ceased; sustains while fixes stay absent after the door opened, so
        # hours away from home remain one exit episode.
        for spec in self.roles["entry_door"]:
            door_ts = window.last_active_ts(spec.sensor_id)
            if door_ts is None:
                continue
            stale = pos is None or now - pos.ts > cfg.exit_window
            at_door = pos is not None and in_exit_zone(pos, self.plan)
            if now - door_ts <= cfg.exit_window and (at_door or stale):
                why = "position in exit zone" if at_door else "fixes ceased"
                return made(ActivityLabel.EXIT, [spec.sensor_id, why])
            if stale and (pos is None or door_ts >= pos.ts - cfg.exit_window):
                return made(ActivityLabel.EXIT, [spec.sensor_id, "fixes ceased"])

        if pos is None:
            return InstantLabel(ts=now, user=state.tag_id, label=None)

        # Showering: in bathroom while humidity climbed
        if state.current_room is RoomId.BATHROOM:
            for spec in self.roles["bathroom_humidity"]:
                rise = window.rise_within(spec.sensor_id, now, cfg.humidity_window)
                if rise >= cfg.humidity_delta:
                    return made(
                        ActivityLabel.SHOWERING,
                        [spec.sensor_id, f"humidity +{rise:.2f}", "position"],
                    )

            # Toileting: toilet/faucet interaction nearby, not showering
            for spec in self.roles["toilet"] + self.roles["faucet"]:
                hit = window.last_active_within(spec.sensor_id, now, cfg.appliance_window)
                if hit is not None and self._near(state, spec):
                    return made(ActivityLabel.TOILETING, [spec.sensor_id, "position"])

        if state.current_room is RoomId.KITCHEN:
            # Cooking: stove/microwave sustained for cook_min with the user near
            for spec in self.roles["stove"] + self.roles["microwave"]:
                since = window.active_since(spec.sensor_id, now, cfg.power_threshold)
                if since is not None and now - since >= cfg.cook_min and self._near(state, spec):
                    return made(ActivityLabel.COOKING, [spec.sensor_id, "position"])
            # Kitchen activity: any appliance interaction that is not (yet) cooking
            appliances = (
                self.roles["stove"]
                + self.roles["microwave"]
                + self.roles["fridge"]
                + self.roles["sink"]
            )
            for spec in appliances:
                threshold = cfg.power_threshold if spec.kind is SensorKind.POWER else 0.5
                hit = window.last_active_within(
                    spec.sensor_id, now, cfg.appliance_window, threshold
                )
                if hit is not None and self._near(state, spec):
                    return made(ActivityLabel.KITCHEN_ACTIVITY, [spec.sensor_id, "position"])

        # Computer use: powered workstation nearby (any room)
        for spec in self.roles["workstation"]:
            latest = window.latest(spec.sensor_id)
            if latest and latest[1] >= cfg.power_threshold and self._near(state, spec):
                return made(
                    ActivityLabel.COMPUTER_USE,
                    [spec.sensor_id, "position"],
                    room=state.current_room,
                )

        # Sleeping: stationary near own bed in own bedroom
        if state.current_room is profile.bedroom:
            bed = f"bed_{profile.bedroom.value}"
            if self._near_poi(state, bed) and now - state.stationary_since >= cfg.sleep_min:
                return made(ActivityLabel.SLEEPING, ["position", bed])

        # Resting: stationary near the sofa in the living room
        if state.current_room is RoomId.LIVING_ROOM:
            if self._near_poi(state, "sofa") and now - state.stationary_since >= cfg.rest_min:
                return made(ActivityLabel.RESTING, ["position", "sofa"])

        return InstantLabel(ts=now, user=state.tag_id, label=None)


# -- segmentation ----------------------------------------------------------


class BoundaryKind(Enum):
    STARTED = "started"
    ENDED = "ended"


@dataclass(frozen=True)
class BoundaryEvent:
    kind: BoundaryKind
    episode: ActivityEpisode
    ts: int  # when the boundary was known


def _episode(user: str, label: ActivityLabel, room: RoomId, start: int, end) -> ActivityEpisode:
    return ActivityEpisode(user=user, activity=label, room=room, start=start, end=end)


def segment_episodes(
    instants: Iterable[InstantLabel], cfg: RuleConfig | None = None
) -> list[ActivityEpisode]:
    """Batch segmentation of a single user's sorted instant labels.

    Maximal equal-label runs become episodes; consecutive same-label episodes
    with a gap <= merge_gap merge; closed episodes shorter than min_episode
    are dropped.  The final run stays OPEN iff it reaches the last instant.
    """
    cfg = cfg if cfg is not None else RuleConfig()
    instants = list(instants)
    for a, b in zip(instants, instants[1:]):
        if b.ts < a.ts:
            raise UnsortedInput(f"instant at {b.ts} after {a.ts}")
        if b.user != a.user:
            raise ValueError("segment_episodes expects a single user")

    runs = _runs_from_instants(instants)
    if not runs:
        return []

    open_final = instants[-1].label is not None and runs[-1][3] == instants[-1].ts

    # merge adjacent same-label runs across small gaps
    merged: list[list] = []
    for label, room, start, last in runs:
        if merged and merged[-1][0] == label and start - merged[-1][3] <= cfg.merge_gap:
            merged[-1][3] = last
        else:
            merged.append([label, room, start, last])

    user = instants[0].user
    episodes: list[ActivityEpisode] = []
    for i, (label, room, start, last) in enumerate(merged):
        is_open = open_final and i == len(merged) - 1
        if is_open:
            episodes.append(_episode(user, label, room, start, None))
        else:
            if last - start >= cfg.min_episode and last > start:
                episodes.append(_episode(user, label, room, start, last))
    return episodes


def _runs_from_instants(
    instants: list[InstantLabel],
) -> list[tuple[ActivityLabel, RoomId, int, int]]:
    runs: list[tuple[ActivityLabel, RoomId, int, int]] = []
    current: Optional[list] = None  # [label, room, start, last]
    for inst in instants:
        if inst.label is None:
            if current is not None:
                runs.append(tuple(current))
                current = None
            continue
        room = inst.room if inst.room is not None else room_for_activity(inst.label)
        if current is not None and current[0] == inst.label:
            current[3] = inst.ts
        else:
            if current is not None:
                runs.append(tuple(current))
            current = [inst.label, room, inst.ts, inst.ts]
    if current is not None:
        runs.append(tuple(current))
    return runs


def on_episode_boundary(episodes: list[ActivityEpisode]) -> list[BoundaryEvent]:
    """Expand a segmented episode list into time-ordered Started/Ended events."""
    events: list[BoundaryEvent] = []
    for e in episodes:
        events.append(BoundaryEvent(BoundaryKind.STARTED, e, e.start))
        if not e.is_open:
            events.append(BoundaryEvent(BoundaryKind.ENDED, e, e.end))
    events.sort(key=lambda ev: (ev.ts, ev.kind is BoundaryKind.STARTED))
    return events


class StreamSegmenter:
    """Online segmentation for one user, boundary-compatible with the batch path.

    STARTED fires as soon as an episode is guaranteed to survive (it has
    lasted min_episode), or at finalization for shorter survivors; ENDED
    fires once no later run can merge into the episode.
    """

    def __init__(self, user: str, cfg: RuleConfig | None = None):
        self.user = user
        self.cfg = cfg if cfg is not None else RuleConfig()
        self._active: Optional[list] = None  # [label, room, start, last, emitted]
        self._in_gap = False
        self._last_ts: Optional[int] = None

    def feed(self, inst: InstantLabel) -> list[BoundaryEvent]:
        if inst.user != self.user:
            raise ValueError(f"instant for {inst.user} fed to segmenter of {self.user}")
        if self._last_ts is not None and inst.ts < self._last_ts:
            raise UnsortedInput(f"instant at {inst.ts} after {self._last_ts}")
        self._last_ts = inst.ts
        cfg = self.cfg
        out: list[BoundaryEvent] = []
        label = inst.label
        room = (
            inst.room
            if inst.room is not None
            else (room_for_activity(label) if label else None)
        )

        if self._active is None:
            if label is not None:
                self._active = [label, room, inst.ts, inst.ts, False]
                self._in_gap = False
        elif not self._in_gap:
            if label == self._active[0]:
                self._active[3] = inst.ts
            elif label is None:
                self._in_gap = True
            else:
                out.extend(self._finalize(inst.ts))
                self._active = [label, room, inst.ts, inst.ts, False]
                self._in_gap = False
        else:  # in gap after the active episode's last instant
            if label == self._active[0] and inst.ts - self._active[3] <= cfg.merge_gap:
                self._active[3] = inst.ts
                self._in_gap = False
            elif label == self._active[0]:
                out.extend(self._finalize(inst.ts))
                self._active = [label, room, inst.ts, inst.ts, False]
                self._in_gap = False
            elif label is None:
                if inst.ts - self._active[3] > cfg.merge_gap:
                    out.extend(self._finalize(inst.ts))
                    self._active = None
            else:
                out.extend(self._finalize(inst.ts))
                self._active = [label, room, inst.ts, inst.ts, False]
                self._in_gap = False

        out.extend(self._maybe_start(inst.ts))
        return out

    def _maybe_start(self, ts: int) -> list[BoundaryEvent]:
        if (
            self._active is not None
            and not self._active[4]
            and self._active[3] - self._active[2] >= self.cfg.min_episode
        ):
            self._active[4] = True
            ep = _episode(self.user, self._active[0], self._active[1], self._active[2], None)
            return [BoundaryEvent(BoundaryKind.STARTED, ep, ts)]
        return []

    def _finalize(self, ts: int) -> list[BoundaryEvent]:
        label, room, start, last, emitted = self._active
        events: list[BoundaryEvent] = []
        if last > start and (emitted or last - start >= self.cfg.min_episode):
            if not emitted:
                open_ep = _episode(self.user, label, room, start, None)
                events.append(BoundaryEvent(BoundaryKind.STARTED, open_ep, ts))
            closed = _episode(self.user, label, room, start, last)
            events.append(BoundaryEvent(BoundaryKind.ENDED, closed, ts))
        return events

    def flush(self, ts: Optional[int] = None) -> list[BoundaryEvent]:
        """End of stream: close a gapped episode, leave a live one OPEN."""
        if self._active is None:
            return []
        ts = ts if ts is not None else self._active[3]
        events: list[BoundaryEvent] = []
        if self._in_gap:
            events.extend(self._finalize(ts))
        else:
            label, room, start, last, emitted = self._active
            ep = _episode(self.user, label, room, start, None)
            if not emitted:
                events.append(BoundaryEvent(BoundaryKind.STARTED, ep, ts))
        self._active = None
        self._in_gap = False
        return events
