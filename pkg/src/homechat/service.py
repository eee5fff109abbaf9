"""Live service: background pipeline consumer plus the HTTP/WebSocket API.

The UI (and tests) steer the simulated home exclusively through this API;
all recognition happens server-side and clients only render snapshots and
deltas.
"""

from __future__ import annotations

import asyncio
import logging
import math
import queue
import threading
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .clock import Clock, RealClock
from .ingest import RawReading, normalize
from .model import UserPosition, render_activity_name, render_room_name
from .pipeline import Pipeline

log = logging.getLogger(__name__)


class LiveService:
    """Owns the single consumer thread that folds events into the pipeline."""

    def __init__(self, pipeline: Pipeline, clock: Clock | None = None, tick_period: float = 1.0):
        self.pipeline = pipeline
        self.clock = clock if clock is not None else RealClock()
        self.tick_period = tick_period
        self._queue: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, name="homechat-pipeline", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def enqueue(self, event) -> None:
        self._queue.put(event)

    def _loop(self) -> None:
        while not self._stop.is_set():
            try:
                event = self._queue.get(timeout=self.tick_period)
            except queue.Empty:
                # periodic re-evaluation so duration rules fire without events
                with self._lock:
                    self.pipeline.tick(int(self.clock.now()))
                continue
            with self._lock:
                try:
                    self.pipeline.handle(event)
                except Exception:
                    log.exception("error handling %r", event)

    # -- snapshots ---------------------------------------------------------

    def state_snapshot(self, include_heatmaps: bool = False) -> dict:
        with self._lock:
            users = {}
            for profile in self.pipeline.users:
                tag = profile.tag_id
                state = self.pipeline.states[tag]
                current = self.pipeline.current_activity.get(tag)
                entry = {
                    "name": profile.display_name,
                    "room": state.current_room.value,
                    "room_label": render_room_name(state.current_room),
                    "position": (
                        None
                        if state.last_position is None
                        else {"x": state.last_position.x, "y": state.last_position.y}
                    ),
                    "activity": None if current is None else current.activity.value,
                    "activity_label": (
                        None if current is None else render_activity_name(current.activity)
                    ),
                }
                if include_heatmaps:
                    grid = self.pipeline.heatmaps[tag]
                    entry["heatmap"] = {
                        "origin": grid.origin,
                        "cell_size": grid.cell_size,
                        "cells": [[round(v, 6) for v in row] for row in grid.cells.tolist()],
                    }
                users[tag] = entry
            return {"users": users, "interactions": len(self.pipeline.interactions)}

    def interactions_since(self, cursor: int) -> list[tuple[int, dict]]:
        from dataclasses import asdict

        with self._lock:
            items = self.pipeline.interactions[cursor:]
            return [(cursor + i, asdict(rec)) for i, rec in enumerate(items)]


class PositionBody(BaseModel):
    tag: str
    x: float
    y: float


class SensorBody(BaseModel):
    sensor: str
    raw: float


def create_app(service: LiveService) -> FastAPI:
    app = FastAPI(title="homechat")
    pipeline = service.pipeline

    @app.get("/users")
    def users():
        return [
            {"tag_id": p.tag_id, "name": p.display_name, "bedroom": p.bedroom.value}
            for p in pipeline.users
        ]

    @app.get("/floorplan")
    def floorplan():
        return {
            "rooms": [
                {"room": room.value, "label": render_room_name(room), "polygon": list(poly)}
                for room, poly in pipeline.plan.rooms
            ],
            "exit_zone": list(pipeline.plan.exit_zone),
            "pois": {k: list(v) for k, v in pipeline.plan.pois.items()},
            "sensors": [
                {
                    "sensor_id": s.sensor_id,
                    "kind": s.kind.value,
                    "room": s.room.value,
                    "location": list(s.location),
                    "raw_range": list(s.raw_range),
                }
                for s in pipeline.sensors
            ],
        }

    @app.get("/state")
    def state(heatmaps: bool = False):
        return service.state_snapshot(include_heatmaps=heatmaps)

    @app.get("/interactions")
    def interactions(user: str | None = None, since: int = 0):
        items = service.interactions_since(since)
        if user is not None:
            items = [(i, rec) for i, rec in items if rec["user"] == user]
        items.reverse()  # newest first
        return [{"cursor": i, **rec} for i, rec in items]

    @app.post("/simulate/position")
    def simulate_position(body: PositionBody):
        if body.tag not in pipeline.users:
            raise HTTPException(status_code=404, detail=f"unknown user {body.tag}")
        if not (math.isfinite(body.x) and math.isfinite(body.y)):
            raise HTTPException(status_code=400, detail="coordinates must be finite")
        event = UserPosition(ts=int(service.clock.now()), tag_id=body.tag, x=body.x, y=body.y)
        service.enqueue(event)
        return {"accepted": True, "ts": event.ts}

    @app.post("/simulate/sensor")
    def simulate_sensor(body: SensorBody):
        if body.sensor not in pipeline.sensors:
            raise HTTPException(status_code=404, detail=f"unknown sensor {body.sensor}")
        spec = pipeline.sensors.get(body.sensor)
        if not math.isfinite(body.raw):
            raise HTTPException(status_code=400, detail="raw value must be finite")
        if spec.is_binary and not 0.0 <= body.raw <= 1.0:
            raise HTTPException(status_code=400, detail="binary sensor raw value outside [0,1]")
        reading = RawReading(ts=int(service.clock.now()), sensor_id=body.sensor, raw_value=body.raw)
        service.enqueue(normalize(reading, spec))
        return {"accepted": True, "ts": reading.ts}

    @app.websocket("/events")
    async def events(ws: WebSocket, since: int = 0):
        await ws.accept()
        cursor = since
        last_state: dict | None = None
        try:
            while True:
                for i, rec in service.interactions_since(cursor):
                    await ws.send_json({"type": "interaction", "cursor": i + 1, "record": rec})
                    cursor = i + 1
                snapshot = service.state_snapshot()
                if snapshot != last_state:
                    await ws.send_json({"type": "state", "state": snapshot})
                    last_state = snapshot
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return

    return app
