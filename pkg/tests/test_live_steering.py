"""Live steering loop: the browser-console contract exercised end to end.

Drives the real HTTP/WebSocket service the way the UI does — drop an avatar
in the kitchen, push the stove — and checks that recognition, prompting and
the transcript stream all follow within the interactive latency budget.
"""

import time

import pytest
from fastapi.testclient import TestClient

from homechat.gateway import Gateway, MockBackend
from homechat.har import RuleConfig
from homechat.pipeline import Pipeline
from homechat.service import LiveService, create_app


FAST_RULES = RuleConfig(
    rest_min=1,
    sleep_min=2,
    cook_min=1,
    merge_gap=1,
    min_episode=1,
    exit_window=2,
    appliance_window=2,
)


@pytest.fixture()
def live(users, sensors, plan):
    gw = Gateway(MockBackend())
    pipeline = Pipeline(users, sensors, plan, gw, rules=FAST_RULES)
    svc = LiveService(pipeline, tick_period=0.05)
    svc.start()
    yield TestClient(create_app(svc)), svc
    svc.stop()


def wait_until(predicate, timeout=2.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


def test_stove_steering_produces_cooking_interaction(live):
    client, _ = live
    # drag Mary next to the stove, then push the stove to full power
    assert client.post(
        "/simulate/position", json={"tag": "5b66", "x": 5.0, "y": 1.3}
    ).status_code == 200
    assert client.post(
        "/simulate/sensor", json={"sensor": "kitchen_stove_power", "raw": 1800}
    ).status_code == 200

    # activity badge within the interactive budget
    assert wait_until(
        lambda: client.get("/state").json()["users"]["5b66"]["activity"] == "cooking"
    ), "cooking badge did not appear within 2 s"

    # chat bubble with the mock backend's canonical reply
    assert wait_until(lambda: client.get("/interactions").json())
    rec = client.get("/interactions").json()[0]
    assert rec["user"] == "5b66"
    assert rec["activity"] == "cooking"
    assert rec["response_text"] == "Acknowledged cooking in kitchen."
    assert rec["score"] == 50


def test_reconnect_with_cursor_yields_no_duplicate_bubbles(live):
    client, _ = live
    client.post("/simulate/position", json={"tag": "5b66", "x": 5.0, "y": 1.3})
    client.post("/simulate/sensor", json={"sensor": "kitchen_stove_power", "raw": 1800})
    assert wait_until(lambda: client.get("/interactions").json())

    seen = []
    with client.websocket_connect("/events") as ws:
        while True:
            msg = ws.receive_json()
            if msg["type"] == "interaction":
                seen.append(msg)
                break
    cursor = seen[-1]["cursor"]

    # reconnect where the first connection left off: only state, no replays
    with client.websocket_connect(f"/events?since={cursor}") as ws:
        msg = ws.receive_json()
    assert msg["type"] == "state"
    assert len({m["cursor"] for m in seen}) == len(seen)
