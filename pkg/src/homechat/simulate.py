"""Deterministic synthetic dataset generator for the three-occupant flat.

Produces a sensor/position JSONL trace spanning N days that exercises every
recognition rule: each occupant follows a fixed daily schedule and the
generator emits position fixes plus the sensor side effects each activity
causes (stove power, humidity ramps, door pulses, ...).  Seeded jitter keeps
traces realistic but byte-reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .history import to_unix
from .ingest import RawReading, event_sort_key, serialize_record
from .model import UserPosition

BASE_DATE = "2024-07-26"
POSITION_PERIOD = 30  # s between fixes while at home
IDLE_SPOT = (3.5, 4.3)  # living room, away from the sofa and all sensors

# anchor point per activity (user position while performing it)
_ANCHORS = {
    "sleeping": None,  # per-user bed
    "toileting": (9.0, 0.9),
    "showering": (8.3, 2.0),
    "cooking": (5.2, 0.8),
    "kitchen_activity": (6.3, 3.3),
    "computer_use": (2.2, 6.3),
    "resting": (2.1, 2.4),
    "exit": (0.6, 0.6),
}

_BEDS = {"bedroom1": (5.5, 6.5), "bedroom2": (8.5, 6.5)}

Schedule = list[tuple[str, str, str]]  # (activity, "HH:MM", "HH:MM")

DAILY_SCHEDULES: dict[str, Schedule] = {
    "5b66": [  # Mary
        ("sleeping", "02:01", "03:18"),
        ("toileting", "03:20", "03:24"),
        ("sleeping", "03:30", "08:32"),
        ("toileting", "08:33", "08:41"),
        ("cooking", "08:45", "09:10"),
        ("kitchen_activity", "09:12", "09:31"),
        ("exit", "09:34", "13:06"),
        ("cooking", "13:10", "13:59"),
        ("kitchen_activity", "14:00", "14:20"),
        ("resting", "14:35", "15:30"),
        ("cooking", "18:30", "19:10"),
        ("exit", "20:08", "21:06"),
        ("kitchen_activity", "21:10", "21:40"),
        ("showering", "23:03", "23:20"),
        ("resting", "23:30", "23:55"),
    ],
    "16fe": [  # John
        ("sleeping", "01:30", "07:45"),
        ("toileting", "07:50", "07:58"),
        ("computer_use", "08:10", "09:40"),
        ("kitchen_activity", "09:45", "10:05"),
        ("resting", "10:15", "11:30"),
        ("cooking", "12:00", "12:40"),
        ("computer_use", "14:00", "16:30"),
        ("exit", "17:00", "18:20"),
        ("resting", "19:00", "20:30"),
        ("showering", "21:30", "21:45"),
        ("sleeping", "22:30", "23:58"),
    ],
    "ed9c": [  # Michael
        ("sleeping", "00:10", "08:50"),
        ("showering", "09:00", "09:15"),
        ("kitchen_activity", "09:20", "09:40"),
        ("exit", "10:00", "14:30"),
        ("computer_use", "15:00", "18:00"),
        ("cooking", "19:30", "20:10"),
        ("resting", "20:30", "22:00"),
        ("sleeping", "22:40", "23:55"),
    ],
}

_BEDROOM_OF = {"5b66": "bedroom1", "16fe": "bedroom1", "ed9c": "bedroom2"}


@dataclass
class _Trace:
    positions: list[UserPosition]
    readings: list[RawReading]


def _anchor(tag: str, activity: str) -> tuple[float, float]:
    if activity == "sleeping":
        return _BEDS[_BEDROOM_OF[tag]]
    return _ANCHORS[activity]


def _emit_positions(trace: _Trace, rng, tag, point, start, end, jitter=0.15):
    t = start
    while t < end:
        trace.positions.append(
            UserPosition(
                ts=t,
                tag_id=tag,
                x=round(point[0] + rng.uniform(-jitter, jitter), 3),
                y=round(point[1] + rng.uniform(-jitter, jitter), 3),
            )
        )
        t += POSITION_PERIOD


def _emit_block(trace: _Trace, rng, tag: str, activity: str, start: int, end: int):
    r = trace.readings
    if activity == "exit":
        # door pulse, a moment at the door, fixes cease, door pulse on return
        r.append(RawReading(start, "entry_door_contact", 1))
        r.append(RawReading(start + 5, "entry_door_contact", 0))
        _emit_positions(trace, rng, tag, _ANCHORS["exit"], start, start + 31, jitter=0.1)
        r.append(RawReading(end - 10, "entry_door_contact", 1))
        r.append(RawReading(end - 5, "entry_door_contact", 0))
        _emit_positions(trace, rng, tag, _ANCHORS["exit"], end - 30, end, jitter=0.1)
        return

    _emit_positions(trace, rng, tag, _anchor(tag, activity), start, end)
    if activity == "toileting":
        t = start + 5
        while t < end:
            r.append(RawReading(t, "bathroom_toilet_vibration", 1))
            r.append(RawReading(t + 5, "bathroom_toilet_vibration", 0))
            t += 40
    elif activity == "showering":
        ramp = 300
        t = start
        while t < end:
            frac = min(1.0, (t - start) / ramp)
            r.append(RawReading(t, "bathroom_humidity", round(45 + 35 * frac, 1)))
            t += 30
    elif activity == "cooking":
        t = start
        while t < end:
            r.append(RawReading(t, "kitchen_stove_power", 1500))
            t += 45
        r.append(RawReading(end, "kitchen_stove_power", 0))
    elif activity == "kitchen_activity":
        t = start
        while t < end:
            r.append(RawReading(t, "kitchen_fridge_contact", 1))
            r.append(RawReading(t + 10, "kitchen_fridge_contact", 0))
            t += 50
    elif activity == "computer_use":
        t = start
        while t < end:
            r.append(RawReading(t, "office_workstation_power", 300))
            t += 60
        r.append(RawReading(end, "office_workstation_power", 0))


def generate_events(days: int = 2, seed: int = 7) -> list[str]:
    """Return the trace as sorted, serialized JSONL lines."""
    rng = random.Random(seed)
    trace = _Trace(positions=[], readings=[])
    day0 = to_unix(f"{BASE_DATE} 00:00:00")
    for day in range(days):
        base = day0 + day * 86400
        for tag, schedule in DAILY_SCHEDULES.items():
            cursor = base
            for activity, start_s, end_s in schedule:
                h, m = start_s.split(":")
                start = base + int(h) * 3600 + int(m) * 60
                h, m = end_s.split(":")
                end = base + int(h) * 3600 + int(m) * 60
                if cursor < start:
                    _emit_positions(trace, rng, tag, IDLE_SPOT, cursor, start)
                _emit_block(trace, rng, tag, activity, start, end)
                cursor = end
            if cursor < base + 86400:
                _emit_positions(trace, rng, tag, IDLE_SPOT, cursor, base + 86400)
    items = [*trace.positions, *trace.readings]
    items.sort(key=event_sort_key)
    return [serialize_record(item) for item in items]


def write_fixture(path: str | Path, days: int = 2, seed: int = 7) -> int:
    lines = generate_events(days=days, seed=seed)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return len(lines)
