"""Per-user chronological episode store and history-line rendering.

Episodes are stored against Unix timestamps; prompts render them as naive
"YYYY-MM-DD HH:MM:SS" strings.  The queue feeds bounded windows of recent
closed episodes to the prompt builder.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .model import (
    ActivityEpisode,
    ActivityLabel,
    HomechatError,
    RoomId,
    activity_from_render_name,
    render_activity_name,
    render_room_name,
    room_for_activity,
)
from .templates_io import load_template


class MalformedTimestamp(HomechatError, ValueError):
    pass


class OverlappingEpisode(HomechatError):
    pass


class OpenEpisode(HomechatError):
    pass


_TS_FORMAT = "%Y-%m-%d %H:%M:%S"


def to_unix(ts: str) -> int:
    """Convert "YYYY-MM-DD HH:MM:SS" (UTC) to Unix seconds."""
    try:
        dt = datetime.strptime(ts.strip(), _TS_FORMAT)
    except ValueError:
        raise MalformedTimestamp(f"bad timestamp {ts!r}") from None
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


def from_unix(seconds: int) -> str:
    """Inverse of :func:`to_unix` on whole-second inputs."""
    dt = datetime.fromtimestamp(int(seconds), tz=timezone.utc)
    return dt.strftime(_TS_FORMAT)


def render_pre_act(episode: ActivityEpisode, template: str | None = None) -> str:
    """Render one closed episode as a history line for the prompt."""
    if episode.is_open:
        raise OpenEpisode(f"cannot render open episode {episode}")
    if template is None:
        template = load_template("pre_act_format.txt")
    return template.format(
        start=from_unix(episode.start),
        room=render_room_name(episode.room),
        activity=render_activity_name(episode.activity),
        end=from_unix(episode.end),
    )


@dataclass(frozen=True)
class HistoryWindow:
    user: str
    from_unix: int
    to_unix: int
    episodes: tuple[ActivityEpisode, ...]
    max_lines: int

    def lines(self, template: str | None = None) -> list[str]:
        return [render_pre_act(e, template) for e in self.episodes]


class ContextQueue:
    """Chronological store of closed and open episodes, one list per user."""

    def __init__(self):
        self._closed: dict[str, list[ActivityEpisode]] = {}
        self._open: dict[str, ActivityEpisode] = {}

    def push(self, user: str, episode: ActivityEpisode) -> None:
        closed = self._closed.setdefault(user, [])
        open_ep = self._open.get(user)
        if open_ep is not None:
            if episode.start == open_ep.start and episode.activity == open_ep.activity:
                # closing (or restating) the currently open episode
                if episode.is_open:
                    self._open[user] = episode
                else:
                    del self._open[user]
                    closed.append(episode)
                return
            if episode.start < open_ep.start:
                raise OverlappingEpisode(
                    f"{user}: episode at {episode.start} overlaps open episode "
                    f"started {open_ep.start}"
                )
            # a new episode implicitly supersedes a stale open one
            del self._open[user]
        if closed and episode.start < closed[-1].end:
            raise OverlappingEpisode(
                f"{user}: episode at {episode.start} overlaps episode ending "
                f"{closed[-1].end}"
            )
        if episode.is_open:
            self._open[user] = episode
        else:
            closed.append(episode)

    def episodes(self, user: str) -> list[ActivityEpisode]:
        eps = list(self._closed.get(user, ()))
        if user in self._open:
            eps.append(self._open[user])
        return eps

    def open_episode(self, user: str) -> Optional[ActivityEpisode]:
        return self._open.get(user)

    def window(self, user: str, now: int, lookback: int, max_lines: int) -> HistoryWindow:
        """Closed episodes with end in [now - lookback, now], newest-truncated."""
        if lookback <= 0:
            raise ValueError("lookback must be positive")
        lo = now - lookback
        eps = [
            e
            for e in self._closed.get(user, ())
            if e.end >= lo and e.end <= now
        ]
        if len(eps) > max_lines:
            eps = eps[-max_lines:]
        return HistoryWindow(
            user=user, from_unix=lo, to_unix=now, episodes=tuple(eps), max_lines=max_lines
        )

    # -- persistence -------------------------------------------------------

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for user in sorted(self._closed):
                for e in self._closed[user]:
                    fh.write(json.dumps(episode_to_record(e)) + "\n")

    def load_jsonl(self, path: str | Path) -> int:
        n = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                e = episode_from_record(json.loads(line))
                self.push(e.user, e)
                n += 1
        return n


def episode_to_record(e: ActivityEpisode) -> dict:
    return {
        "user": e.user,
        "activity": e.activity.value,
        "room": e.room.value,
        "start": from_unix(e.start),
        "end": None if e.end is None else from_unix(e.end),
    }


def episode_from_record(rec: dict) -> ActivityEpisode:
    return ActivityEpisode(
        user=rec["user"],
        activity=ActivityLabel(rec["activity"]),
        room=RoomId(rec["room"]),
        start=to_unix(rec["start"]),
        end=None if rec.get("end") in (None, "") else to_unix(rec["end"]),
    )


def load_activity_csv(path: str | Path) -> list[ActivityEpisode]:
    """Load an activity dataset CSV: ``user_id,activity,start,end,room``.

    ``room`` may be blank, in which case the activity's canonical room is
    used.  Rows are returned sorted by start time.
    """
    episodes: list[ActivityEpisode] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"user_id", "activity", "start", "end"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise HomechatError(
                f"activity CSV needs columns {sorted(required)}, got {reader.fieldnames}"
            )
        for row in reader:
            activity = activity_from_render_name(row["activity"])
            room_txt = (row.get("room") or "").strip()
            room = RoomId(room_txt) if room_txt else room_for_activity(activity)
            episodes.append(
                ActivityEpisode(
                    user=row["user_id"].strip(),
                    activity=activity,
                    room=room,
                    start=to_unix(row["start"]),
                    end=to_unix(row["end"]),
                )
            )
    episodes.sort(key=lambda e: (e.start, e.user))
    return episodes
