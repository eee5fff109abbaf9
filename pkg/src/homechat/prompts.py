"""Prompt assembly: role preamble + user context + history lines + question.

The wording of every template is an asset file, so prompt-structure
experiments only need a ``--templates`` directory, never a code change.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .history import HistoryWindow, from_unix, to_unix
from .model import (
    ActivityLabel,
    RoomId,
    UserProfile,
    activity_from_render_name,
    render_activity_name,
    render_room_name,
)
from .templates_io import load_template


@dataclass(frozen=True)
class PromptMeta:
    user: str
    activity: ActivityLabel
    room: RoomId
    now: int


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str
    user_turn: str
    meta: PromptMeta


class PromptBuilder:
    """Stateless prompt factory bound to one template directory (or defaults)."""

    def __init__(self, template_dir: str | Path | None = None):
        self._init_context = load_template("init_context.txt", template_dir)
        self._pre_act = load_template("pre_act_format.txt", template_dir)
        self._question = load_template("question_format.txt", template_dir)

    def init_preamble(self) -> str:
        return self._init_context

    @property
    def pre_act_template(self) -> str:
        return self._pre_act

    def render_question(self, now: int, room: RoomId, activity: ActivityLabel) -> str:
        return self._question.format(
            now=from_unix(now),
            room=render_room_name(room),
            activity=render_activity_name(activity),
        )

    def build(
        self,
        profile: UserProfile,
        hist: HistoryWindow,
        now: int,
        activity: ActivityLabel,
        room: RoomId,
    ) -> PromptBundle:
        parts = [profile.context_sentence]
        parts.extend(hist.lines(self._pre_act))
        parts.append(self.render_question(now, room, activity))
        return PromptBundle(
            system_preamble=self._init_context,
            user_turn="\n".join(parts),
            meta=PromptMeta(user=profile.tag_id, activity=activity, room=room, now=now),
        )


_QUESTION_RE = re.compile(
    r"^It is (?P<now>\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}), "
    r"the user enters into the (?P<room>.+?) and starts (?P<activity>.+?)\. "
)

_ROOM_FROM_RENDER = {
    "living room": RoomId.LIVING_ROOM,
    "office": RoomId.OFFICE,
    "bedroom": RoomId.BEDROOM_1,
    "kitchen": RoomId.KITCHEN,
    "bathroom": RoomId.BATHROOM,
    "exit door area": RoomId.EXIT_DOOR_AREA,
    "outside": RoomId.OUTSIDE,
}


def parse_question(text: str) -> tuple[int, RoomId, ActivityLabel]:
    """Inverse of the default question template: recover (now, room, activity).

    "bedroom" maps back to bedroom 1, which renders identically.
    """
    m = _QUESTION_RE.match(text)
    if m is None:
        raise ValueError("text does not match the question grammar")
    room = _ROOM_FROM_RENDER.get(m.group("room"))
    if room is None:
        raise ValueError(f"unknown room phrase {m.group('room')!r}")
    return to_unix(m.group("now")), room, activity_from_render_name(m.group("activity"))
