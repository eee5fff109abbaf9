"""Built-in fixtures: the three case-study occupants, a six-room floor plan
approximating the apartment layout, and its ambient sensor registry.

All of these are defaults; config files can replace each one at startup.
"""

from __future__ import annotations

from .localize import FloorPlan
from .model import (
    RoomId,
    SensorKind,
    SensorRegistry,
    SensorSpec,
    UserProfile,
    UserRegistry,
)


def default_users() -> UserRegistry:
    return UserRegistry(
        [
            UserProfile(
                tag_id="16fe",
                display_name="John",
                context_sentence=(
                    "The user you are going to talk to is called John and he is "
                    "60 years old, he lives with his wife and son."
                ),
                bedroom=RoomId.BEDROOM_1,
            ),
            UserProfile(
                tag_id="5b66",
                display_name="Mary",
                context_sentence=(
                    "The user you are going to talk to is called Mary and she is "
                    "55 years old, she lives with her husband and son."
                ),
                bedroom=RoomId.BEDROOM_1,
            ),
            UserProfile(
                tag_id="ed9c",
                display_name="Michael",
                context_sentence=(
                    "The user you are going to talk to is called Michael and he is "
                    "27 years old, he lives with his parents."
                ),
                bedroom=RoomId.BEDROOM_2,
            ),
        ]
    )


# 10 m x 8 m two-bedroom flat; rectangular rooms, origin at the entry corner.
def default_floorplan() -> FloorPlan:
    rect = lambda x0, y0, x1, y1: ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    return FloorPlan(
        rooms=(
            (RoomId.LIVING_ROOM, rect(0, 0, 4, 5)),
            (RoomId.OFFICE, rect(0, 5, 4, 8)),
            (RoomId.KITCHEN, rect(4, 0, 7, 4)),
            (RoomId.BATHROOM, rect(7, 0, 10, 4)),
            (RoomId.BEDROOM_1, rect(4, 4, 7, 8)),
            (RoomId.BEDROOM_2, rect(7, 4, 10, 8)),
        ),
        exit_zone=rect(0, 0, 1.2, 1.2),
        pois={
            "sofa": (2.0, 2.5),
            "bed_bedroom1": (5.5, 6.5),
            "bed_bedroom2": (8.5, 6.5),
        },
    )


def default_sensors() -> SensorRegistry:
    return SensorRegistry(
        [
            SensorSpec("entry_door_contact", SensorKind.CONTACT, RoomId.LIVING_ROOM, (0.3, 0.2)),
            SensorSpec("living_room_motion", SensorKind.MOTION, RoomId.LIVING_ROOM, (2.0, 4.5)),
            SensorSpec("kitchen_stove_power", SensorKind.POWER, RoomId.KITCHEN, (5.0, 0.5), (0.0, 2000.0)),
            SensorSpec("kitchen_microwave_power", SensorKind.POWER, RoomId.KITCHEN, (6.2, 0.5), (0.0, 1500.0)),
            SensorSpec("kitchen_fridge_contact", SensorKind.CONTACT, RoomId.KITCHEN, (6.5, 3.5)),
            SensorSpec("kitchen_sink_vibration", SensorKind.VIBRATION, RoomId.KITCHEN, (4.5, 3.5)),
            SensorSpec("bathroom_humidity", SensorKind.HUMIDITY, RoomId.BATHROOM, (8.5, 2.0), (0.0, 100.0)),
            SensorSpec("bathroom_temperature", SensorKind.TEMPERATURE, RoomId.BATHROOM, (8.5, 2.3), (0.0, 50.0)),
            SensorSpec("bathroom_toilet_vibration", SensorKind.VIBRATION, RoomId.BATHROOM, (9.2, 0.8)),
            SensorSpec("bathroom_faucet_vibration", SensorKind.VIBRATION, RoomId.BATHROOM, (7.4, 3.5)),
            SensorSpec("office_workstation_power", SensorKind.POWER, RoomId.OFFICE, (2.0, 6.5), (0.0, 500.0)),
            SensorSpec("bedroom1_motion", SensorKind.MOTION, RoomId.BEDROOM_1, (5.5, 7.5)),
            SensorSpec("bedroom2_motion", SensorKind.MOTION, RoomId.BEDROOM_2, (8.5, 7.5)),
        ]
    )
