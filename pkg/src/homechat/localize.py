"""Position fixes -> room occupancy, sensor proximity and occupancy heatmaps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import HomechatError, RoomId, SensorSpec, UserPosition

log = logging.getLogger(__name__)

Point = tuple[float, float]
Polygon = Sequence[Point]

DEFAULT_PROXIMITY_RADIUS = 1.5
DEFAULT_STATIONARY_EPS = 0.5
DEFAULT_CELL_SIZE = 0.5
DEFAULT_DECAY = 0.9


class MalformedFloorPlan(HomechatError):
    pass


def _on_segment(p: Point, a: Point, b: Point, eps: float = 1e-9) -> bool:
    (px, py), (ax, ay), (bx, by) = p, a, b
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > eps:
        return False
    dot = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
    sq_len = (bx - ax) ** 2 + (by - ay) ** 2
    return -eps <= dot <= sq_len + eps


def point_in_polygon(p: Point, polygon: Polygon) -> bool:
    """Even-odd ray casting; points on an edge count as inside."""
    x, y = p
    inside = False
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if _on_segment(p, a, b):
            return True
        (ax, ay), (bx, by) = a, b
        if (ay > y) != (by > y):
            x_cross = ax + (y - ay) * (bx - ax) / (by - ay)
            if x < x_cross:
                inside = not inside
    return inside


@dataclass(frozen=True)
class FloorPlan:
    """Room polygons in declared order plus the exit-door zone and named points."""

    rooms: tuple[tuple[RoomId, tuple[Point, ...]], ...]
    exit_zone: tuple[Point, ...]
    pois: dict[str, Point]

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [x for _, poly in self.rooms for x, _ in poly]
        ys = [y for _, poly in self.rooms for _, y in poly]
        return min(xs), min(ys), max(xs), max(ys)

    def poi(self, name: str) -> Optional[Point]:
        return self.pois.get(name)


def resolve_room(p: UserPosition, plan: FloorPlan) -> RoomId:
    """First declared room containing the point; OUTSIDE if none does."""
    pt = (p.x, p.y)
    for room, poly in plan.rooms:
        if point_in_polygon(pt, poly):
            return room
    return RoomId.OUTSIDE


def in_exit_zone(p: UserPosition, plan: FloorPlan) -> bool:
    return point_in_polygon((p.x, p.y), plan.exit_zone)


def proximity(p: UserPosition, spec: SensorSpec, radius: float) -> tuple[float, bool]:
    """Euclidean distance to a sensor and whether it is within `radius` (inclusive)."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    dist = math.hypot(p.x - spec.location[0], p.y - spec.location[1])
    return dist, dist <= radius


def distance_to(p: UserPosition, point: Point) -> float:
    return math.hypot(p.x - point[0], p.y - point[1])


@dataclass(frozen=True)
class OccupancyGrid:
    origin: Point
    cell_size: float
    cells: np.ndarray  # shape (ny, nx), nonnegative, sums to 1 when any mass

    @classmethod
    def empty(
        cls, plan: FloorPlan, cell_size: float = DEFAULT_CELL_SIZE
    ) -> "OccupancyGrid":
        x0, y0, x1, y1 = plan.bounds()
        nx = max(1, math.ceil((x1 - x0) / cell_size))
        ny = max(1, math.ceil((y1 - y0) / cell_size))
        return cls(origin=(x0, y0), cell_size=cell_size, cells=np.zeros((ny, nx)))

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ny, nx = self.cells.shape
        cx = int((x - self.origin[0]) / self.cell_size)
        cy = int((y - self.origin[1]) / self.cell_size)
        return min(max(cy, 0), ny - 1), min(max(cx, 0), nx - 1)


def update_heatmap(
    grid: OccupancyGrid, p: UserPosition, decay: float = DEFAULT_DECAY
) -> OccupancyGrid:
    """Exponentially decay old mass, deposit the new fix, renormalize to 1."""
    if not 0.0 <= decay < 1.0:
        raise ValueError("decay must be in [0, 1)")
    cells = grid.cells * decay
    cy, cx = grid.cell_of(p.x, p.y)
    cells[cy, cx] += 1.0
    cells /= cells.sum()
    return replace(grid, cells=cells)


@dataclass(frozen=True)
class UserState:
    tag_id: str
    last_position: Optional[UserPosition] = None
    current_room: RoomId = RoomId.OUTSIDE
    room_entry_ts: int = 0
    stationary_since: int = 0


def update_user_state(
    state: UserState,
    p: UserPosition,
    plan: FloorPlan,
    eps: float = DEFAULT_STATIONARY_EPS,
) -> UserState:
    """Fold one position fix into the user's state.

    Out-of-order fixes are dropped with a diagnostic rather than raised:
    the live pipeline must keep flowing.
    """
    last = state.last_position
    if last is not None and p.ts < last.ts:
        log.warning("out-of-order fix for %s: %s < %s; dropped", p.tag_id, p.ts, last.ts)
        return state
    room = resolve_room(p, plan)
    if last is None:
        return UserState(
            tag_id=state.tag_id,
            last_position=p,
            current_room=room,
            room_entry_ts=p.ts,
            stationary_since=p.ts,
        )
    displaced = math.hypot(p.x - last.x, p.y - last.y) > eps
    return UserState(
        tag_id=state.tag_id,
        last_position=p,
        current_room=room,
        room_entry_ts=p.ts if room != state.current_room else state.room_entry_ts,
        stationary_since=p.ts if displaced else state.stationary_since,
    )


# -- floor plan file format ------------------------------------------------
#
#   room <room_id>: x,y x,y x,y ...
#   exit_zone: x,y x,y ...
#   poi <name>: x,y
#
# Blank lines and lines starting with '#' are ignored.


def _parse_points(text: str, where: str) -> tuple[Point, ...]:
    pts = []
    for token in text.split():
        try:
            xs, ys = token.split(",")
            pts.append((float(xs), float(ys)))
        except ValueError:
            raise MalformedFloorPlan(f"bad point {token!r} in {where}") from None
    return tuple(pts)


def parse_floorplan(text: str) -> FloorPlan:
    rooms: list[tuple[RoomId, tuple[Point, ...]]] = []
    exit_zone: tuple[Point, ...] = ()
    pois: dict[str, Point] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise MalformedFloorPlan(f"line {lineno}: missing ':'")
        head, body = line.split(":", 1)
        words = head.split()
        if words[0] == "room" and len(words) == 2:
            try:
                room = RoomId(words[1])
            except ValueError:
                raise MalformedFloorPlan(f"line {lineno}: unknown room {words[1]!r}") from None
            poly = _parse_points(body, f"room {words[1]}")
            if len(poly) < 3:
                raise MalformedFloorPlan(f"line {lineno}: polygon needs >= 3 vertices")
            rooms.append((room, poly))
        elif words[0] == "exit_zone" and len(words) == 1:
            exit_zone = _parse_points(body, "exit_zone")
        elif words[0] == "poi" and len(words) == 2:
            pts = _parse_points(body, f"poi {words[1]}")
            if len(pts) != 1:
                raise MalformedFloorPlan(f"line {lineno}: poi takes exactly one point")
            pois[words[1]] = pts[0]
        else:
            raise MalformedFloorPlan(f"line {lineno}: unrecognized directive {head!r}")
    if not rooms:
        raise MalformedFloorPlan("no rooms declared")
    return FloorPlan(rooms=tuple(rooms), exit_zone=exit_zone, pois=pois)


def load_floorplan(path: str | Path) -> FloorPlan:
    with open(path, encoding="utf-8") as fh:
        return parse_floorplan(fh.read())
