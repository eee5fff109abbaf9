import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from homechat.fixtures import default_floorplan, default_sensors, default_users
from homechat.simulate import write_fixture


@pytest.fixture(scope="session")
def plan():
    return default_floorplan()


@pytest.fixture(scope="session")
def sensors():
    return default_sensors()


@pytest.fixture(scope="session")
def users():
    return default_users()


@pytest.fixture(scope="session")
def two_day_trace(tmp_path_factory):
    """The generated two-day, three-occupant sensor fixture (JSONL path)."""
    path = tmp_path_factory.mktemp("fixture") / "trace.jsonl"
    write_fixture(path, days=2, seed=7)
    return path
