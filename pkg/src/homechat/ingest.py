"""Event ingestion: JSONL replay files and MQTT, merged into one ordered stream.

JSONL grammar, one record per line:

    sensor reading:  {"ts": "2024-07-26T13:59:00Z", "sensor": "kitchen_stove_power", "raw": 1800}
    position fix:    {"ts": "2024-07-26T13:59:00Z", "tag": "5b66", "x": 3.2, "y": 1.4}

Unknown extra keys are ignored.  Equal timestamps order positions before
sensor events, then lexicographically by sensor id, so localization is
current before proximity rules fire.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Union

from .clock import Clock, RealClock
from .model import (
    HomechatError,
    SensorEvent,
    SensorRegistry,
    SensorSpec,
    UserPosition,
)

log = logging.getLogger(__name__)

#: replay speed meaning "as fast as possible"
MAX_SPEED = math.inf

Event = Union[SensorEvent, UserPosition]


class MalformedLine(HomechatError):
    def __init__(self, msg: str, lineno: int | None = None):
        super().__init__(msg if lineno is None else f"line {lineno}: {msg}")
        self.lineno = lineno


class NonFiniteValue(HomechatError):
    pass


@dataclass(frozen=True)
class RawReading:
    ts: int
    sensor_id: str
    raw_value: float


def normalize(raw: RawReading, spec: SensorSpec) -> SensorEvent:
    """Map a native-unit reading onto [0,1]; out-of-range analog values clamp."""
    if spec.sensor_id != raw.sensor_id:
        raise ValueError(f"spec {spec.sensor_id} does not match reading {raw.sensor_id}")
    if not math.isfinite(raw.raw_value):
        raise NonFiniteValue(f"{raw.sensor_id}: non-finite raw value {raw.raw_value}")
    lo, hi = spec.raw_range
    value = (raw.raw_value - lo) / (hi - lo)
    value = min(max(value, 0.0), 1.0)
    return SensorEvent(ts=raw.ts, sensor_id=raw.sensor_id, value=value)


def _parse_ts(value, lineno: int | None = None) -> int:
    if isinstance(value, (int, float)) and math.isfinite(value):
        return int(value)
    if isinstance(value, str):
        try:
            dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError:
            raise MalformedLine(f"unparseable timestamp {value!r}", lineno) from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise MalformedLine(f"unparseable timestamp {value!r}", lineno)


def parse_event_record(rec: dict, lineno: int | None = None) -> RawReading | UserPosition:
    """Decode one already-parsed JSON record."""
    if "ts" not in rec:
        raise MalformedLine("missing 'ts'", lineno)
    ts = _parse_ts(rec["ts"], lineno)
    if "sensor" in rec:
        if "raw" not in rec:
            raise MalformedLine("sensor record missing 'raw'", lineno)
        try:
            raw_value = float(rec["raw"])
        except (TypeError, ValueError):
            raise MalformedLine(f"bad raw value {rec['raw']!r}", lineno) from None
        return RawReading(ts=ts, sensor_id=str(rec["sensor"]), raw_value=raw_value)
    if "tag" in rec:
        try:
            x, y = float(rec["x"]), float(rec["y"])
        except (KeyError, TypeError, ValueError):
            raise MalformedLine("position record needs numeric 'x' and 'y'", lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MalformedLine("non-finite coordinates", lineno)
        return UserPosition(ts=ts, tag_id=str(rec["tag"]), x=x, y=y)
    raise MalformedLine("record is neither a sensor reading nor a position", lineno)


def parse_event_line(line: str, lineno: int | None = None) -> RawReading | UserPosition:
    """Decode one JSONL record line."""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(rec, dict):
        raise MalformedLine("record must be a JSON object", lineno)
    return parse_event_record(rec, lineno)


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def serialize_record(item: RawReading | UserPosition | SensorEvent) -> str:
    """Inverse of parse_event_line (normalized events serialize their value as raw)."""
    if isinstance(item, RawReading):
        return json.dumps({"ts": _iso(item.ts), "sensor": item.sensor_id, "raw": item.raw_value})
    if isinstance(item, SensorEvent):
        return json.dumps({"ts": _iso(item.ts), "sensor": item.sensor_id, "raw": item.value})
    return json.dumps({"ts": _iso(item.ts), "tag": item.tag_id, "x": item.x, "y": item.y})


def event_sort_key(item) -> tuple:
    """Nondecreasing ts; ties put positions first, then sensor id order."""
    if isinstance(item, UserPosition):
        return (item.ts, 0, item.tag_id)
    return (item.ts, 1, item.sensor_id)


def read_records(
    path: str | Path, skip_bad: bool = False
) -> tuple[list[RawReading | UserPosition], int]:
    """Read and parse every line; returns (records, skipped_count)."""
    records: list[RawReading | UserPosition] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(parse_event_line(line, lineno))
            except MalformedLine as exc:
                if not skip_bad:
                    raise
                skipped += 1
                log.warning("skipping bad line: %s", exc)
    return records, skipped


def replay(
    path: str | Path,
    registry: SensorRegistry,
    speed: float = MAX_SPEED,
    clock: Clock | None = None,
    skip_bad: bool = False,
) -> Iterator[Event]:
    """Emit the file's events in timestamp order, pacing wall delays by Δts/speed.

    speed=MAX_SPEED emits with no delay.  Sensor readings are normalized
    against the registry; unknown sensors follow the skip_bad policy.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    clock = clock if clock is not None else RealClock()
    records, _ = read_records(path, skip_bad=skip_bad)
    records.sort(key=event_sort_key)
    prev_ts: int | None = None
    for rec in records:
        if prev_ts is not None and rec.ts > prev_ts and speed != MAX_SPEED:
            clock.sleep((rec.ts - prev_ts) / speed)
        prev_ts = rec.ts
        if isinstance(rec, RawReading):
            try:
                yield normalize(rec, registry.get(rec.sensor_id))
            except HomechatError as exc:
                if not skip_bad:
                    raise
                log.warning("skipping reading: %s", exc)
        else:
            yield rec


def merge_sorted(streams: Iterable[Iterable[Event]]) -> Iterator[Event]:
    """Merge already-sorted streams; never emits a ts smaller than one emitted."""
    import heapq

    def keyed(stream):
        for i, ev in enumerate(stream):
            yield (*event_sort_key(ev), i, ev)

    for item in heapq.merge(*(keyed(s) for s in streams)):
        yield item[-1]
