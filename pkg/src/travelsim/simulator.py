"""Executes an itinerary against a world and task and records scoring items.

Level 1 checks four items per action: ``entity_exists``,
``schedule_match``, ``spatial_continuity`` and ``chronological_order``.
Level 2 checks one item per constraint instance of the task.  Failed items
produce an :class:`ErrorEvent` tagged ``EIM`` (entity/schedule), ``CKE``
(continuity/chronology) or ``CNC`` (any constraint).

Execution never stops early.  After a failed action the traveller is placed
at the action's declared end location so later actions are judged against
the intended route; the clock never runs backwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .itinerary import GoToCity, GoToPlace, Itinerary, StayIn, Visit
from .task import Constraint, Task
from .timeutil import DAY, occurrences, overlaps, within_daily
from .world import World, ticket_mode

L1_CODES = ("entity_exists", "schedule_match", "spatial_continuity", "chronological_order")

TAXONOMY = {
    "entity_exists": "EIM",
    "schedule_match": "EIM",
    "spatial_continuity": "CKE",
    "chronological_order": "CKE",
}


@dataclass
class SimState:
    current_city: str | None
    current_place: str | None
    clock: int
    spent: int = 0
    visited: set = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "current_city": self.current_city,
            "current_place": self.current_place,
            "clock": self.clock,
            "spent": self.spent,
            "visited": sorted([list(v) for v in self.visited]),
        }


@dataclass(frozen=True)
class ScoringItem:
    level: str
    ref: int
    code: str
    passed: bool


@dataclass(frozen=True)
class ErrorEvent:
    action_index: int
    taxonomy: str
    message: str
    level: str = "L1"
    code: str = ""


@dataclass
class Trace:
    items: list[ScoringItem]
    events: list[ErrorEvent]
    final_state: SimState
    total_cost: int
    total_minutes: int

    def counts(self, level: str) -> tuple[int, int]:
        """(passed, total) for a level."""
        chosen = [i for i in self.items if i.level == level]
        return sum(i.passed for i in chosen), len(chosen)

    @property
    def l1_full(self) -> bool:
        a, b = self.counts("L1")
        return b > 0 and a == b

    @property
    def l2_full(self) -> bool:
        a, b = self.counts("L2")
        return a == b

    @property
    def valid(self) -> bool:
        return self.l1_full and self.l2_full

    def objective_value(self, objective: str) -> int:
        return self.total_cost if objective == "cost_cents" else self.total_minutes

    def failed_tickets(self, itinerary: Itinerary) -> list[str]:
        out = []
        for item in self.items:
            if item.level == "L1" and not item.passed and item.code in ("entity_exists", "schedule_match"):
                action = itinerary[item.ref]
                if isinstance(action, GoToCity) and action.ticket not in out:
                    out.append(action.ticket)
        return out

    def to_dict(self) -> dict:
        a1, b1 = self.counts("L1")
        a2, b2 = self.counts("L2")
        return {
            "items": [{"level": i.level, "ref": i.ref, "code": i.code, "passed": i.passed}
                      for i in self.items],
            "events": [{"action_index": e.action_index, "level": e.level, "code": e.code,
                        "taxonomy": e.taxonomy, "message": e.message} for e in self.events],
            "totals": {"l1_passed": a1, "l1_total": b1, "l2_passed": a2, "l2_total": b2,
                       "total_cost": self.total_cost, "total_minutes": self.total_minutes},
            "final_state": self.final_state.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class _Step:
    """What an action did, as declared, for the constraint checks."""

    action: object
    city: str | None          # city the action took place in (origin for trips)
    pre: tuple[str | None, str | None]
    post: tuple[str | None, str | None]


def simulate(world: World, task: Task, it: Itinerary) -> Trace:
    state = SimState(task.start.city, task.start.place, task.start.time)
    items: list[ScoringItem] = []
    events: list[ErrorEvent] = []
    steps: list[_Step] = []
    t_start, t_end = task.start.time, task.horizon_end

    def in_horizon(action) -> bool:
        return t_start <= action.start and action.end <= t_end

    for idx, action in enumerate(it):
        city = world.city(state.current_city) if state.current_city else None
        pre = (state.current_city, state.current_place)
        charge = 0
        messages: dict[str, str] = {}

        if isinstance(action, GoToPlace):
            routes = city.routes(action.origin, action.destination) if city else ()
            matching = [r for r in routes if r.duration_minutes == action.arrive - action.depart]
            entity = bool(routes)
            schedule = bool(matching) and in_horizon(action)
            spatial = city is not None and action.origin == state.current_place
            if not entity:
                messages["entity_exists"] = (f"no route {action.origin} -> {action.destination} "
                                             f"in {state.current_city}")
            if not schedule:
                messages["schedule_match"] = "travel time does not match any route or leaves the horizon"
            if not spatial:
                messages["spatial_continuity"] = (f"origin {action.origin} is not the current "
                                                  f"place {state.current_place}")
            if matching:
                charge = matching[0].price
            act_city = state.current_city
            post = (state.current_city, action.destination)

        elif isinstance(action, Visit):
            place = city.place(action.place) if city else None
            entity = place is not None and place.is_attraction
            schedule = in_horizon(action)
            spatial = action.place == state.current_place
            if not entity:
                messages["entity_exists"] = f"no attraction {action.place} in {state.current_city}"
            if not schedule:
                messages["schedule_match"] = "visit leaves the task horizon"
            if not spatial:
                messages["spatial_continuity"] = (f"visiting {action.place} while at "
                                                  f"{state.current_place}")
            if entity:
                charge = place.visit_price
                state.visited.add((state.current_city, action.place))
            act_city = state.current_city
            post = (state.current_city, action.place)

        elif isinstance(action, GoToCity):
            trip = world.trip(action.ticket)
            entity = (trip is not None and trip.origin_city == action.origin
                      and trip.dest_city == action.destination)
            schedule = (trip is not None and trip.depart == action.depart
                        and trip.arrive == action.arrive and in_horizon(action))
            if trip is not None and not trip.capacity_available:
                schedule = False
                messages["schedule_match"] = f"ticket {action.ticket} is sold out"
            elif not schedule:
                messages["schedule_match"] = f"times do not match ticket {action.ticket}"
            spatial = action.origin == state.current_city
            if not entity:
                messages["entity_exists"] = (f"ticket {action.ticket} does not run "
                                             f"{action.origin} -> {action.destination}")
            if not spatial:
                messages["spatial_continuity"] = (f"departing {action.origin} while in "
                                                  f"{state.current_city}")
            if entity and schedule:
                charge = trip.price
            dest = world.city(action.destination)
            act_city = action.origin
            post = (action.destination, dest.start_place if dest else None)

        elif isinstance(action, StayIn):
            entity = world.city(action.city) is not None
            schedule = in_horizon(action)
            spatial = action.city == state.current_city
            if not entity:
                messages["entity_exists"] = f"unknown city {action.city}"
            if not schedule:
                messages["schedule_match"] = "stay leaves the task horizon"
            if not spatial:
                messages["spatial_continuity"] = f"staying in {action.city} while in {state.current_city}"
            act_city = action.city
            if spatial:
                post = pre
            else:
                dest = world.city(action.city)
                post = (action.city, dest.start_place if dest else None)
        else:  # pragma: no cover - parse layer prevents this
            raise TypeError(f"not an action: {action!r}")

        chrono = action.start >= state.clock
        if not chrono:
            messages["chronological_order"] = "action starts before the previous one ended"
        results = {"entity_exists": entity, "schedule_match": schedule,
                   "spatial_continuity": spatial, "chronological_order": chrono}
        for code in L1_CODES:
            ok = bool(results[code])
            items.append(ScoringItem("L1", idx, code, ok))
            if not ok:
                events.append(ErrorEvent(idx, TAXONOMY[code], messages.get(code, code), "L1", code))

        state.spent += charge
        state.current_city, state.current_place = post
        state.clock = max(state.clock, action.end)
        steps.append(_Step(action, act_city, pre, post))

    for j, constraint in enumerate(task.constraints):
        ok, where, message = _check_constraint(world, task, constraint, steps, state)
        items.append(ScoringItem("L2", j, constraint.kind, ok))
        if not ok:
            events.append(ErrorEvent(where, "CNC", message, "L2", constraint.kind))

    return Trace(items, events, state, state.spent, state.clock - task.start.time)


def _visits(steps: list[_Step], city: str, place: str):
    for i, s in enumerate(steps):
        if isinstance(s.action, Visit) and s.city == city and s.action.place == place:
            yield i, s.action


def _location_at(task: Task, steps: list[_Step], t: int) -> tuple[str | None, str | None]:
    loc = (task.start.city, task.start.place)
    for s in steps:
        a = s.action
        if t <= a.start:
            return loc
        if t < a.end:
            if isinstance(a, GoToPlace):
                return (s.city, None)
            if isinstance(a, GoToCity):
                return (None, None)
            return s.post if isinstance(a, Visit) else s.pre
        loc = s.post
    return loc


def _check_constraint(world: World, task: Task, c: Constraint, steps: list[_Step],
                      state: SimState) -> tuple[bool, int, str]:
    kind = c.kind
    if kind == "time_limit":
        end = max((s.action.end for s in steps), default=task.start.time)
        return end <= c["deadline"], len(steps) - 1, "trip ends after the deadline"

    if kind == "budget":
        return state.spent <= c["max_cents"], -1, f"spent {state.spent} > budget {c['max_cents']}"

    if kind == "transportation":
        allowed = set(c["modes"])
        for i, s in enumerate(steps):
            if isinstance(s.action, GoToCity) and ticket_mode(s.action.ticket) not in allowed:
                return False, i, f"ticket {s.action.ticket} is not an allowed mode"
        return True, -1, ""

    if kind == "city_duration":
        total = sum(s.action.end - s.action.begin for s in steps
                    if isinstance(s.action, StayIn) and s.action.city == c["city"])
        return total >= c["min_minutes"], -1, f"stayed {total} min in {c['city']}"

    if kind == "spot_duration":
        city = world.city(c["city"])
        place = city.place(c["place"]) if city else None
        need = max(c["min_minutes"], place.min_visit_minutes if place else 0)
        ok = any(v.end - v.begin >= need for _, v in _visits(steps, c["city"], c["place"]))
        return ok, -1, f"no visit of {need} min to {c['place']}"

    if kind == "spot_opening_hours":
        city = world.city(c["city"])
        place = city.place(c["place"]) if city else None
        visits = list(_visits(steps, c["city"], c["place"]))
        if place is None or not visits:
            return False, -1, f"{c['place']} never visited"
        for i, v in visits:
            if v.end - v.begin < place.min_visit_minutes:
                return False, i, f"visit to {c['place']} shorter than its minimum"
            if not any(within_daily(w, v.begin, v.end) for w in place.opening_windows):
                return False, i, f"{c['place']} is closed during the visit"
        return True, -1, ""

    if kind == "activity_time":
        window = (c["start_minute"], c["end_minute"])
        for i, s in enumerate(steps):
            if isinstance(s.action, Visit) and not within_daily(window, s.action.begin, s.action.end):
                return False, i, "sightseeing outside the allowed hours"
        return True, -1, ""

    if kind == "rest_time":
        window = (c["start_minute"], c["end_minute"])
        for i, s in enumerate(steps):
            a = s.action
            if isinstance(a, (Visit, GoToPlace)):
                for lo, hi in occurrences(window, a.start, a.end):
                    if overlaps(a.start, a.end, lo, hi):
                        return False, i, "activity during rest time"
        return True, -1, ""

    if kind == "specific_hotel":
        first_day = task.start.time // DAY
        last_day = task.horizon_end // DAY
        for day in range(first_day, last_day + 1):
            t = day * DAY + c["check_minute"]
            if not task.start.time <= t <= task.horizon_end:
                continue
            city, place = _location_at(task, steps, t)
            if city == c["city"] and place != c["hotel"]:
                return False, -1, f"not at {c['hotel']} at night"
        return True, -1, ""

    raise ValueError(f"unknown constraint kind {kind!r}")  # pragma: no cover
