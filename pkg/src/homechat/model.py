"""Canonical domain types shared by every stage of the pipeline.

Rooms, activities, the activity->room mapping, user profiles and the
registries are all defined here; downstream modules never invent their own
vocabularies.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class HomechatError(Exception):
    """Base class for all errors raised by this package."""


class ScoreOutOfRange(HomechatError):
    pass


class UnknownSensor(HomechatError):
    pass


class UnknownUser(HomechatError):
    pass


class RoomId(str, Enum):
    LIVING_ROOM = "living_room"
    OFFICE = "office"
    BEDROOM_1 = "bedroom1"
    KITCHEN = "kitchen"
    BATHROOM = "bathroom"
    BEDROOM_2 = "bedroom2"
    EXIT_DOOR_AREA = "exit_door_area"
    OUTSIDE = "outside"


# Lowercase phrases used inside prompts.  Both bedrooms deliberately render
# as "bedroom": the prompt grammar talks about *the* bedroom of the user.
ROOM_RENDER_NAMES: dict[RoomId, str] = {
    RoomId.LIVING_ROOM: "living room",
    RoomId.OFFICE: "office",
    RoomId.BEDROOM_1: "bedroom",
    RoomId.KITCHEN: "kitchen",
    RoomId.BATHROOM: "bathroom",
    RoomId.BEDROOM_2: "bedroom",
    RoomId.EXIT_DOOR_AREA: "exit door area",
    RoomId.OUTSIDE: "outside",
}


class ActivityLabel(str, Enum):
    TOILETING = "toileting"
    RESTING = "resting"
    EXIT = "exit"
    COOKING = "cooking"
    SHOWERING = "showering"
    COMPUTER_USE = "computer_use"
    SLEEPING = "sleeping"
    KITCHEN_ACTIVITY = "kitchen_activity"


_ACTIVITY_RENDER_NAMES: dict[ActivityLabel, str] = {
    ActivityLabel.TOILETING: "toileting",
    ActivityLabel.RESTING: "resting",
    ActivityLabel.EXIT: "exit",
    ActivityLabel.COOKING: "cooking",
    ActivityLabel.SHOWERING: "showering",
    ActivityLabel.COMPUTER_USE: "using the computer",
    ActivityLabel.SLEEPING: "sleeping",
    ActivityLabel.KITCHEN_ACTIVITY: "kitchen activity",
}

_RENDER_TO_ACTIVITY = {v: k for k, v in _ACTIVITY_RENDER_NAMES.items()}

# Canonical room per activity.  Sleeping defaults to bedroom 1; callers that
# know the user's profile should prefer room_for_activity(..., profile=...).
_ACTIVITY_ROOMS: dict[ActivityLabel, RoomId] = {
    ActivityLabel.TOILETING: RoomId.BATHROOM,
    ActivityLabel.RESTING: RoomId.LIVING_ROOM,
    ActivityLabel.EXIT: RoomId.EXIT_DOOR_AREA,
    ActivityLabel.COOKING: RoomId.KITCHEN,
    ActivityLabel.SHOWERING: RoomId.BATHROOM,
    ActivityLabel.COMPUTER_USE: RoomId.OFFICE,
    ActivityLabel.SLEEPING: RoomId.BEDROOM_1,
    ActivityLabel.KITCHEN_ACTIVITY: RoomId.KITCHEN,
}


@dataclass(frozen=True)
class UserProfile:
    tag_id: str
    display_name: str
    context_sentence: str
    bedroom: RoomId = RoomId.BEDROOM_1

    def __post_init__(self):
        if not self.context_sentence:
            raise ValueError("context_sentence must be non-empty")
        if self.bedroom not in (RoomId.BEDROOM_1, RoomId.BEDROOM_2):
            raise ValueError(f"bedroom must be a bedroom, got {self.bedroom}")


class SensorKind(str, Enum):
    CONTACT = "contact"
    MOTION = "motion"
    VIBRATION = "vibration"
    HUMIDITY = "humidity"
    TEMPERATURE = "temperature"
    POWER = "power"


BINARY_KINDS = frozenset({SensorKind.CONTACT, SensorKind.MOTION, SensorKind.VIBRATION})


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: str
    kind: SensorKind
    room: RoomId
    location: tuple[float, float]
    raw_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = self.raw_range
        if self.kind in BINARY_KINDS:
            if (lo, hi) != (0.0, 1.0):
                raise ValueError(f"{self.sensor_id}: binary sensors use raw_range [0,1]")
        elif not lo < hi:
            raise ValueError(f"{self.sensor_id}: raw_range min must be < max")

    @property
    def is_binary(self) -> bool:
        return self.kind in BINARY_KINDS


@dataclass(frozen=True)
class SensorEvent:
    ts: int  # UTC unix seconds
    sensor_id: str
    value: float  # normalized, 1.0 == fully active/open/detected

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"sensor value {self.value} outside [0,1]")


@dataclass(frozen=True)
class UserPosition:
    ts: int
    tag_id: str
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("position coordinates must be finite")


#: Sentinel end for an episode that has not closed yet.
OPEN = None


@dataclass(frozen=True)
class ActivityEpisode:
    user: str
    activity: ActivityLabel
    room: RoomId
    start: int
    end: Optional[int]  # OPEN (None) while ongoing

    def __post_init__(self):
        if self.end is not None and not self.start < self.end:
            raise ValueError("closed episode needs start < end")

    @property
    def is_open(self) -> bool:
        return self.end is None

    def duration(self) -> Optional[int]:
        return None if self.end is None else self.end - self.start


@dataclass(frozen=True)
class ScoredResponse:
    text: str
    score: int
    backend_id: str
    latency_ms: int = 0

    def __post_init__(self):
        if not self.text:
            raise ValueError("response text must be non-empty")
        validate_score(self.score)
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")


def room_for_activity(activity: ActivityLabel, profile: UserProfile | None = None) -> RoomId:
    """Canonical room of an activity; sleeping follows the user's own bedroom."""
    if activity is ActivityLabel.SLEEPING and profile is not None:
        return profile.bedroom
    return _ACTIVITY_ROOMS[activity]


def render_activity_name(activity: ActivityLabel) -> str:
    """Lowercase phrase used in prompt templates (injective over labels)."""
    return _ACTIVITY_RENDER_NAMES[activity]


def activity_from_render_name(name: str) -> ActivityLabel:
    """Inverse of :func:`render_activity_name`; also accepts enum values/names."""
    key = name.strip().lower()
    if key in _RENDER_TO_ACTIVITY:
        return _RENDER_TO_ACTIVITY[key]
    try:
        return ActivityLabel(key)
    except ValueError:
        pass
    try:
        return ActivityLabel[name.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown activity name: {name!r}") from None


def render_room_name(room: RoomId) -> str:
    return ROOM_RENDER_NAMES[room]


def validate_score(n: int) -> int:
    """Accept a relevance score iff it lies in [0, 100]."""
    if not isinstance(n, int) or isinstance(n, bool) or not 0 <= n <= 100:
        raise ScoreOutOfRange(f"score {n!r} outside [0, 100]")
    return n


class UserRegistry:
    """Immutable tag_id -> UserProfile lookup."""

    def __init__(self, profiles: list[UserProfile]):
        self._by_tag: dict[str, UserProfile] = {}
        for p in profiles:
            if p.tag_id in self._by_tag:
                raise ValueError(f"duplicate tag_id {p.tag_id}")
            self._by_tag[p.tag_id] = p

    def get(self, tag_id: str) -> UserProfile:
        try:
            return self._by_tag[tag_id]
        except KeyError:
            raise UnknownUser(f"unknown tag_id {tag_id!r}") from None

    def __contains__(self, tag_id: str) -> bool:
        return tag_id in self._by_tag

    def __iter__(self):
        return iter(self._by_tag.values())

    def __len__(self) -> int:
        return len(self._by_tag)


class SensorRegistry:
    """Immutable sensor_id -> SensorSpec lookup."""

    def __init__(self, specs: list[SensorSpec]):
        self._by_id: dict[str, SensorSpec] = {}
        for s in specs:
            if s.sensor_id in self._by_id:
                raise ValueError(f"duplicate sensor_id {s.sensor_id}")
            self._by_id[s.sensor_id] = s

    def get(self, sensor_id: str) -> SensorSpec:
        try:
            return self._by_id[sensor_id]
        except KeyError:
            raise UnknownSensor(f"unknown sensor_id {sensor_id!r}") from None

    def __contains__(self, sensor_id: str) -> bool:
        return sensor_id in self._by_id

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def parse_user_registry(text: str) -> UserRegistry:
    """Parse the line-oriented user registry config.

    Grammar: a ``[<tag_id>]`` section header followed by ``context="..."``,
    ``name="..."`` and optionally ``bedroom="bedroom1|bedroom2"``.
    """
    cp = configparser.ConfigParser()
    cp.read_file(io.StringIO(text))
    profiles = []
    for tag in cp.sections():
        section = cp[tag]
        context = _unquote(section.get("context", ""))
        name = _unquote(section.get("name", tag))
        bedroom = _unquote(section.get("bedroom", "bedroom1")).lower()
        profiles.append(
            UserProfile(
                tag_id=tag,
                display_name=name,
                context_sentence=context,
                bedroom=RoomId(bedroom),
            )
        )
    return UserRegistry(profiles)


def load_user_registry(path) -> UserRegistry:
    with open(path, encoding="utf-8") as fh:
        return parse_user_registry(fh.read())
