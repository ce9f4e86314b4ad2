"""Planning tasks: start conditions, targets, constraints and the hidden witness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .itinerary import Itinerary, itinerary_from_json, itinerary_to_json
from .timeutil import DAY, TimeFormatError, check_date, parse_time, render_time

OBJECTIVES = ("cost_cents", "total_minutes")

# kind -> required parameter names
CONSTRAINT_PARAMS: dict[str, tuple[str, ...]] = {
    "time_limit": ("deadline",),
    "budget": ("max_cents",),
    "transportation": ("modes",),
    "city_duration": ("city", "min_minutes"),
    "spot_duration": ("city", "place", "min_minutes"),
    "specific_hotel": ("city", "hotel", "check_minute"),
    "activity_time": ("start_minute", "end_minute"),
    "spot_opening_hours": ("city", "place"),
    "rest_time": ("start_minute", "end_minute"),
}


class TaskError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    """One constraint instance; ``params`` holds kind-specific values.

    Time points (``deadline``) are stored as integer minutes; minute-of-day
    values (``check_minute``, ``start_minute``, ``end_minute``) as integers in
    ``[0, 1440]``.
    """

    kind: str
    params: tuple[tuple[str, object], ...]

    @classmethod
    def make(cls, kind: str, **params) -> "Constraint":
        if kind not in CONSTRAINT_PARAMS:
            raise TaskError(f"unknown constraint kind {kind!r}")
        wanted = set(CONSTRAINT_PARAMS[kind])
        if set(params) != wanted:
            raise TaskError(f"{kind} takes parameters {sorted(wanted)}, got {sorted(params)}")
        if "modes" in params:
            params["modes"] = tuple(params["modes"])
        return cls(kind, tuple(sorted(params.items())))

    def __getitem__(self, key: str):
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    def get(self, key: str, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def describe(self, start_date: str) -> str:
        from .timeutil import render_clock

        k = self.kind
        if k == "time_limit":
            return f"finish the whole trip by {render_time(self['deadline'], start_date)}"
        if k == "budget":
            return f"spend at most {self['max_cents'] / 100:.2f}"
        if k == "transportation":
            return "inter-city travel only with tickets of class " + "/".join(self["modes"])
        if k == "city_duration":
            return f"stay in {self['city']} for at least {self['min_minutes']} minutes"
        if k == "spot_duration":
            return f"spend at least {self['min_minutes']} minutes at {self['place']} in {self['city']}"
        if k == "specific_hotel":
            return (f"be at {self['hotel']} in {self['city']} every night at "
                    f"{render_clock(self['check_minute'])}")
        if k == "activity_time":
            return (f"sightseeing only between {render_clock(self['start_minute'])} and "
                    f"{render_clock(self['end_minute'])}")
        if k == "spot_opening_hours":
            return f"visit {self['place']} in {self['city']} only while it is open"
        if k == "rest_time":
            return (f"rest between {render_clock(self['start_minute'])} and "
                    f"{render_clock(self['end_minute'])}: no sightseeing or local travel")
        return k


@dataclass(frozen=True)
class CityTarget:
    city: str
    stay_minutes: int = 0


@dataclass(frozen=True)
class SpotTarget:
    city: str
    place: str
    visit_minutes: int


@dataclass(frozen=True)
class Start:
    city: str
    place: str
    time: int


@dataclass(frozen=True)
class Task:
    id: str
    task_type: int
    start_date: str
    start: Start
    horizon_minutes: int
    objective: str
    cities: tuple[CityTarget, ...] = ()
    spots: tuple[SpotTarget, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    prose: str = ""
    witness: Itinerary | None = None
    suite: str = ""

    @property
    def horizon_end(self) -> int:
        return self.start.time + self.horizon_minutes

    @property
    def target_cities(self) -> list[str]:
        """Cities the plan must reach, in declaration order."""
        seen: list[str] = []
        for c in self.cities:
            if c.city not in seen:
                seen.append(c.city)
        for s in self.spots:
            if s.city not in seen:
                seen.append(s.city)
        return seen

    def constraints_of(self, kind: str) -> list[Constraint]:
        return [c for c in self.constraints if c.kind == kind]

    def with_witness(self, witness: Itinerary | None) -> "Task":
        return replace(self, witness=witness)

    def to_dict(self) -> dict:
        return task_to_dict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def validate_task(task: Task) -> list[str]:
    defects = []
    try:
        check_date(task.start_date)
    except TimeFormatError as exc:
        defects.append(str(exc))
    if task.task_type not in (1, 2, 3):
        defects.append(f"task type must be 1, 2 or 3, got {task.task_type}")
    if task.objective not in OBJECTIVES:
        defects.append(f"unknown objective {task.objective!r}")
    if task.horizon_minutes <= 0 or task.start.time < 0:
        defects.append("horizon must be positive and start time non-negative")
    if task.task_type == 1 and (task.spots or not task.cities):
        defects.append("type 1 targets are cities only")
    if task.task_type == 2:
        if task.cities or not task.spots:
            defects.append("type 2 targets are attractions only")
        elif len({s.city for s in task.spots}) != 1:
            defects.append("type 2 attractions must lie in one city")
    if task.task_type == 3 and (not task.spots or not task.cities):
        defects.append("type 3 targets both cities and attractions")
    for c in task.constraints:
        if c.kind == "budget" and c["max_cents"] <= 0:
            defects.append("budget must be positive")
        if c.kind == "time_limit" and not (task.start.time < c["deadline"]):
            defects.append("deadline precedes the start")
        for key in ("check_minute", "start_minute", "end_minute"):
            value = c.get(key)
            if value is not None and not 0 <= value <= DAY:
                defects.append(f"{c.kind}.{key} outside the day")
    return defects


# -- serialization ---------------------------------------------------------

def _constraint_to_dict(c: Constraint, start_date: str) -> dict:
    out: dict = {"kind": c.kind}
    for key, value in c.params:
        if key == "deadline":
            value = render_time(value, start_date)
        elif key == "modes":
            value = list(value)
        out[key] = value
    return out


def _constraint_from_dict(d: dict, start_date: str) -> Constraint:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in CONSTRAINT_PARAMS:
        raise TaskError(f"unknown constraint kind {kind!r}")
    if "deadline" in d:
        d["deadline"] = parse_time(d["deadline"], start_date)
    return Constraint.make(kind, **d)


_TASK_KEYS = {"id", "type", "start_date", "start", "horizon", "objective", "targets",
              "constraints", "prose", "witness", "suite"}


def task_to_dict(task: Task) -> dict:
    sd = task.start_date
    return {
        "id": task.id,
        "suite": task.suite,
        "type": task.task_type,
        "start_date": sd,
        "start": {"city": task.start.city, "place": task.start.place,
                  "time": render_time(task.start.time, sd)},
        "horizon": task.horizon_minutes,
        "objective": task.objective,
        "targets": {
            "cities": [{"city": c.city, "stay_minutes": c.stay_minutes} for c in task.cities],
            "attractions": [{"city": s.city, "place": s.place, "visit_minutes": s.visit_minutes}
                            for s in task.spots],
        },
        "constraints": [_constraint_to_dict(c, sd) for c in task.constraints],
        "prose": task.prose,
        "witness": None if task.witness is None else itinerary_to_json(task.witness, sd),
    }


def task_from_dict(data: dict) -> Task:
    if not isinstance(data, dict):
        raise TaskError("task must be a JSON object")
    unknown = set(data) - _TASK_KEYS
    if unknown:
        raise TaskError(f"unknown task fields {sorted(unknown)}")
    try:
        sd = data["start_date"]
        start = data["start"]
        targets = data.get("targets", {})
        task = Task(
            id=data["id"],
            task_type=data["type"],
            start_date=sd,
            start=Start(start["city"], start["place"], parse_time(start["time"], sd)),
            horizon_minutes=data["horizon"],
            objective=data["objective"],
            cities=tuple(CityTarget(c["city"], c.get("stay_minutes", 0))
                         for c in targets.get("cities", [])),
            spots=tuple(SpotTarget(s["city"], s["place"], s["visit_minutes"])
                        for s in targets.get("attractions", [])),
            constraints=tuple(_constraint_from_dict(c, sd) for c in data.get("constraints", [])),
            prose=data.get("prose", ""),
            witness=(None if data.get("witness") is None
                     else itinerary_from_json(data["witness"], sd)),
            suite=data.get("suite", ""),
        )
    except (KeyError, TypeError, TimeFormatError) as exc:
        raise TaskError(f"malformed task: {exc!r}") from None
    defects = validate_task(task)
    if defects:
        raise TaskError("invalid task: " + "; ".join(defects))
    return task


def load_task(path: str | Path) -> Task:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise TaskError(f"task file is not valid JSON: {exc}") from None
    return task_from_dict(data)


def check_task_against_world(task: Task, world) -> list[str]:
    """References from the task into the world that do not resolve."""
    defects = []
    city = world.city(task.start.city)
    if city is None or city.place(task.start.place) is None:
        defects.append(f"start location {task.start.city}/{task.start.place} not in world")
    for c in task.cities:
        if world.city(c.city) is None:
            defects.append(f"target city {c.city!r} not in world")
    for s in task.spots:
        wc = world.city(s.city)
        p = wc.place(s.place) if wc else None
        if p is None or not p.is_attraction:
            defects.append(f"target attraction {s.city}/{s.place} not in world")
    if world.start_date != task.start_date:
        defects.append("task and world start dates differ")
    return defects
