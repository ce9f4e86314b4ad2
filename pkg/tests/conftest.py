from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from travelsim.task import CityTarget, Constraint, SpotTarget, Start, Task  # noqa: E402
from travelsim.world import City, InterCityTrip, IntraRoute, Place, World  # noqa: E402

SD = "07-01"

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def hm(day: int, h: int, m: int = 0) -> int:
    return day * 1440 + h * 60 + m


def small_world() -> World:
    """Two cities; Alpha has two sights and a hotel, Beta one sight."""
    alpha = City("Alpha", "Alpha Station", (
        Place("Alpha Station", "station"),
        Place("Alpha Hotel", "hotel"),
        Place("Museum", "attraction", ((540, 1020),), 60, 2000),
        Place("Garden", "attraction", ((0, 1440),), 30, 500),
    ), (
        IntraRoute("Alpha Station", "Museum", 20, 300),
        IntraRoute("Alpha Station", "Museum", 10, 900),
        IntraRoute("Museum", "Garden", 15, 200),
        IntraRoute("Garden", "Museum", 15, 200),
        IntraRoute("Alpha Station", "Garden", 30, 400),
        IntraRoute("Garden", "Alpha Hotel", 10, 100),
        IntraRoute("Museum", "Alpha Hotel", 25, 300),
    ))
    beta = City("Beta", "Beta Station", (
        Place("Beta Station", "station"),
        Place("Tower", "attraction", ((600, 1200),), 45, 1500),
    ), (
        IntraRoute("Beta Station", "Tower", 20, 250),
        IntraRoute("Tower", "Beta Station", 20, 250),
    ))
    trips = (
        InterCityTrip("G101", "Alpha", "Beta", hm(0, 9), hm(0, 11), 30000),
        InterCityTrip("K102", "Alpha", "Beta", hm(0, 10), hm(0, 14), 8000),
        InterCityTrip("D103", "Beta", "Alpha", hm(0, 18), hm(0, 20), 15000),
    )
    return World(SD, (alpha, beta), trips)


def make_task(*, task_type=2, start=("Alpha", "Alpha Station", hm(0, 8)), horizon=16 * 60,
              objective="cost_cents", cities=(), spots=(), constraints=(), tid="t") -> Task:
    return Task(tid, task_type, SD, Start(*start), horizon, objective, tuple(cities), tuple(spots),
                tuple(constraints))


@pytest.fixture
def world() -> World:
    return small_world()


@pytest.fixture
def museum_task() -> Task:
    return make_task(spots=[SpotTarget("Alpha", "Museum", 60)],
                     constraints=[Constraint.make("spot_duration", city="Alpha", place="Museum",
                                                  min_minutes=60)])


__all__ = ["CityTarget", "SD", "hm", "make_task", "record_criterion", "small_world"]
