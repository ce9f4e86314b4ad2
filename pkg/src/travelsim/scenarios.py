"""Procedural worlds and tasks with a guaranteed-feasible witness, plus fault injection.

Generation is witness-first: a concrete plan is built on a constraint-free
version of the task, then targets and constraints are read off that plan with
some slack.  Every schedule time is a multiple of five minutes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .itinerary import GoToCity, GoToPlace, Itinerary, StayIn, Visit
from .rng import make_rng
from .simulator import simulate
from .solver import (PlanProblem, SamplingError, _random_genome, decode, sample_valid, solve_exact,
                     solve_heuristic)
from .task import CityTarget, Constraint, SpotTarget, Start, Task, validate_task
from .timeutil import DAY, render_time
from .world import City, InterCityTrip, IntraRoute, Place, World

CITY_NAMES = ("Aldmoor", "Brightwater", "Caldera", "Dunmere", "Eastholm", "Fenwick",
              "Greyport", "Highcliff", "Ironvale", "Juniper")
SIGHTS = ("Museum", "Garden", "Tower", "Temple", "Market", "Gallery", "Lake Park",
          "Old Town", "Zoo", "Harbour")
MODES = ("G", "D", "K")
FAULTS = ("remove_witness_trip", "sellout_witness_ticket", "shift_opening_window")
TYPE_MIX = (96, 95, 173)
TASK_START_MINUTE = 8 * 60
CALIBRATION_SAMPLES = 50

DEFAULT_WEIGHTS = {
    "time_limit": 1.0, "budget": 1.0, "transportation": 0.6, "activity_time": 0.6,
    "spot_opening_hours": 0.8, "rest_time": 0.6, "specific_hotel": 0.6,
}


class GenerationError(RuntimeError):
    pass


class FaultRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class GenParams:
    num_cities: int = 3
    attractions_per_city: int = 3
    trips_per_city_pair: int = 3
    route_density: float = 0.5
    horizon_days: int = 2
    hotels_per_city: int = 2
    constraint_weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    seed: int = 0
    start_date: str = "07-01"

    def check(self) -> None:
        if not 1 <= self.num_cities <= len(CITY_NAMES):
            raise ValueError(f"num_cities must be in 1..{len(CITY_NAMES)}")
        if not 0 <= self.attractions_per_city <= len(SIGHTS):
            raise ValueError(f"attractions_per_city must be in 0..{len(SIGHTS)}")
        if self.num_cities > 1 and self.trips_per_city_pair < 1:
            raise ValueError("every city pair needs at least one trip")
        if self.horizon_days < 1 or self.hotels_per_city < 0:
            raise ValueError("horizon_days >= 1 and hotels_per_city >= 0 required")
        if not 0 <= self.route_density <= 1:
            raise ValueError("route_density must lie in [0, 1]")


def _five(rng, lo: int, hi: int) -> int:
    """Random multiple of 5 in [lo, hi]."""
    return 5 * rng.randint(-(-lo // 5), hi // 5)


# -- worlds ------------------------------------------------------------------

def _opening_windows(rng) -> tuple[tuple[int, int], ...]:
    roll = rng.random()
    if roll < 0.15:
        return ((0, DAY),)
    if roll < 0.35:
        # split opening with a midday closure
        return ((_five(rng, 480, 600), _five(rng, 690, 750)), (_five(rng, 810, 870), _five(rng, 1020, 1200)))
    return ((_five(rng, 360, 660), _five(rng, 1020, 1320)),)


def _city(rng, name: str, params: GenParams) -> City:
    station = f"{name} Station"
    places = [Place(station, "station")]
    if params.attractions_per_city:
        for h in range(params.hotels_per_city):
            places.append(Place(f"{name} Hotel {chr(ord('A') + h)}", "hotel"))
    for sight in rng.sample(SIGHTS, params.attractions_per_city):
        places.append(Place(f"{name} {sight}", "attraction", _opening_windows(rng),
                            _five(rng, 30, 120), 100 * rng.randint(0, 80)))
    routes = []
    for a in places:
        for b in places:
            if a is b:
                continue
            duration = _five(rng, 10, 60)
            price = 100 * rng.randint(2, 30)
            routes.append(IntraRoute(a.name, b.name, duration, price))
            if rng.random() < params.route_density and duration > 10:
                routes.append(IntraRoute(a.name, b.name, _five(rng, 5, duration - 5),
                                         price + 100 * rng.randint(5, 30)))
    return City(name, station, tuple(places), tuple(routes))


_MODE_PROFILE = {  # duration and price ranges per ticket class
    "G": ((60, 150), (200, 500)),
    "D": ((90, 210), (100, 300)),
    "K": ((150, 330), (30, 120)),
}


def generate_world(params: GenParams) -> World:
    """Deterministic in ``params.seed``; every ordered city pair gets
    ``trips_per_city_pair`` trips, all arriving within the horizon."""
    params.check()
    rng = make_rng(params.seed, "world")
    names = list(CITY_NAMES[: params.num_cities])
    cities = tuple(_city(make_rng(params.seed, "city", n), n, params) for n in names)
    horizon = params.horizon_days * DAY
    trips = []
    used: set[str] = set()
    for a in names:
        for b in names:
            if a == b:
                continue
            for k in range(params.trips_per_city_pair):
                mode = MODES[rng.randrange(len(MODES))]
                (d_lo, d_hi), (p_lo, p_hi) = _MODE_PROFILE[mode]
                duration = _five(rng, d_lo, d_hi)
                day = (k * params.horizon_days) // params.trips_per_city_pair
                depart = day * DAY + _five(rng, 510, 1200)
                if depart + duration > horizon:
                    depart = horizon - duration - _five(rng, 0, 120)
                while True:
                    ticket = f"{mode}{rng.randint(1000, 9999)}"
                    if ticket not in used:
                        used.add(ticket)
                        break
                trips.append(InterCityTrip(ticket, a, b, depart, depart + duration,
                                           100 * rng.randint(p_lo, p_hi)))
    world = World(params.start_date, cities, tuple(trips), params.seed)
    defects = world.validate()
    if defects:  # pragma: no cover - the generator only emits well-formed worlds
        raise GenerationError("generated world is invalid: " + "; ".join(defects))
    return world


def world_horizon_days(world: World) -> int:
    last = max((t.arrive for t in world.inter_trips), default=DAY)
    return max(1, -(-last // DAY))


# -- tasks -------------------------------------------------------------------

def _weight(params: GenParams | None, kind: str) -> float:
    weights = params.constraint_weights if params else DEFAULT_WEIGHTS
    return weights.get(kind, 0.0)


def _profile(rng) -> str:
    who = rng.choice(["a retired teacher", "a graduate student", "a family of three",
                      "a business traveller", "two friends"])
    mood = rng.choice(["on a tight schedule", "looking for a relaxed trip",
                       "who likes to plan ahead", "travelling for the first time"])
    return f"You are planning for {who} {mood}."


def render_prose(task: Task, rng=None) -> str:
    """Profile, instruction and constraint list rendered from a fixed template."""
    sd = task.start_date
    lines = [_profile(rng) if rng is not None else "You are planning a trip."]
    where = f"{task.start.place} in {task.start.city} at {render_time(task.start.time, sd)}"
    goal = "spend as little money as possible" if task.objective == "cost_cents" \
        else "finish as early as possible"
    lines.append(f"Starting from {where}, build an itinerary and {goal}. "
                 f"The plan must end by {render_time(task.horizon_end, sd)}.")
    for c in task.cities:
        lines.append(f"- visit the city {c.city}" + (f" and stay {c.stay_minutes} minutes"
                                                      if c.stay_minutes else ""))
    for s in task.spots:
        lines.append(f"- see {s.place} in {s.city} for {s.visit_minutes} minutes")
    if task.constraints:
        lines.append("Constraints:")
        lines.extend(f"- {c.describe(sd)}" for c in task.constraints)
    return "\n".join(lines)


def _visits(it: Itinerary):
    return [a for a in it if isinstance(a, Visit)]


def _rest_candidate(rng, it: Itinerary, horizon_end: int) -> tuple[int, int] | None:
    """A daily window of 30..90 minutes clear of every visit and local move."""
    busy = [(a.start, a.end) for a in it if isinstance(a, (Visit, GoToPlace))]
    if not busy:
        return None
    for _ in range(40):
        length = _five(rng, 30, 90)
        start = _five(rng, 600, 1380 - length)
        clear = True
        for day in range(horizon_end // DAY + 1):
            lo, hi = day * DAY + start, day * DAY + start + length
            if any(s < hi and lo < e for s, e in busy):
                clear = False
                break
        if clear:
            return start, start + length
    return None


def _activity_candidate(rng, it: Itinerary) -> tuple[int, int] | None:
    visits = _visits(it)
    if not visits:
        return None
    lo = min(v.begin % DAY for v in visits)
    hi = max(v.begin % DAY + (v.end - v.begin) for v in visits)
    lo = max(0, lo - _five(rng, 0, 60)) // 5 * 5
    hi = min(DAY, hi + _five(rng, 60, 120))
    hi = -(-hi // 5) * 5
    return (lo, hi) if lo < hi else None


def _derive_constraints(rng, world: World, base: Task, witness: Itinerary,
                        params: GenParams | None) -> list[Constraint]:
    trace = simulate(world, base, witness)
    end = max(a.end for a in witness)
    out: list[Constraint] = []

    def pick(kind: str) -> bool:
        return rng.random() < _weight(params, kind)

    if pick("time_limit"):
        deadline = min(base.horizon_end, end + _five(rng, 60, 240))
        out.append(Constraint.make("time_limit", deadline=deadline))
    if pick("budget") and trace.total_cost > 0:
        slack = rng.randint(0, 30)
        cap = -(-trace.total_cost * (100 + slack) // 10000) * 100
        out.append(Constraint.make("budget", max_cents=cap))
    tickets = [a.ticket for a in witness if isinstance(a, GoToCity)]
    if tickets and pick("transportation"):
        modes = {world.trip(t).mode for t in tickets}
        if rng.random() < 0.5:
            modes.add(rng.choice(MODES))
        out.append(Constraint.make("transportation", modes=sorted(modes)))
    visits = _visits(witness)
    if visits and pick("activity_time"):
        window = _activity_candidate(rng, witness)
        if window:
            out.append(Constraint.make("activity_time", start_minute=window[0], end_minute=window[1]))
    for s in base.spots:
        if pick("spot_opening_hours") and world.city(s.city).place(s.place).opening_windows != ((0, DAY),):
            out.append(Constraint.make("spot_opening_hours", city=s.city, place=s.place))
    if visits and pick("rest_time"):
        window = _rest_candidate(rng, witness, base.horizon_end)
        if window:
            out.append(Constraint.make("rest_time", start_minute=window[0], end_minute=window[1]))
    return out


def _target_constraints(task: Task) -> list[Constraint]:
    """Targets become scored constraints so that reaching them counts at level 2."""
    out = [Constraint.make("city_duration", city=c.city, min_minutes=c.stay_minutes)
           for c in task.cities if c.stay_minutes > 0]
    out += [Constraint.make("spot_duration", city=s.city, place=s.place, min_minutes=s.visit_minutes)
            for s in task.spots]
    return out


def _skeleton(world: World, task_type: int, rng, horizon_days: int, objective: str,
              task_id: str) -> Task:
    names = world.city_names
    horizon = horizon_days * DAY - TASK_START_MINUTE
    if task_type == 2:
        candidates = [c for c in world.cities if len(c.attractions) >= 1]
        if not candidates:
            raise GenerationError("type 2 needs a city with attractions")
        city = rng.choice(candidates)
        k = rng.randint(1, min(3, len(city.attractions)))
        spots = tuple(SpotTarget(city.name, p.name, _five(rng, max(30, p.min_visit_minutes),
                                                          max(30, p.min_visit_minutes) + 60))
                      for p in rng.sample(city.attractions, k))
        start = Start(city.name, city.start_place, TASK_START_MINUTE)
        # single-day sightseeing
        return Task(task_id, 2, world.start_date, start, DAY - TASK_START_MINUTE, objective,
                    spots=spots)
    if len(names) < 2:
        raise GenerationError(f"type {task_type} needs at least two cities")
    start_city = world.city(rng.choice(names))
    others = [n for n in names if n != start_city.name]
    start = Start(start_city.name, start_city.start_place, TASK_START_MINUTE)
    if task_type == 1:
        k = rng.randint(1, min(3, len(others)))
        cities = tuple(CityTarget(n, _five(rng, 60, 360)) for n in rng.sample(others, k))
        return Task(task_id, 1, world.start_date, start, horizon, objective, cities=cities)
    with_sights = [n for n in others if world.city(n).attractions]
    if not with_sights:
        raise GenerationError("type 3 needs attractions outside the start city")
    k = rng.randint(1, min(2, len(with_sights)))
    chosen = rng.sample(with_sights, k)
    if k == 1 and len(others) > 1 and rng.random() < 0.5:
        # a pass-through city with no sights, reached only for a stay
        chosen_cities = chosen + [rng.choice([n for n in others if n not in chosen])]
    else:
        chosen_cities = chosen
    spots = []
    for n in chosen:
        attractions = world.city(n).attractions
        for p in rng.sample(attractions, rng.randint(1, min(2, len(attractions)))):
            base = max(30, p.min_visit_minutes)
            spots.append(SpotTarget(n, p.name, _five(rng, base, base + 60)))
    cities = tuple(CityTarget(n, 0 if n in chosen else _five(rng, 60, 240)) for n in chosen_cities)
    return Task(task_id, 3, world.start_date, start, horizon, objective, cities=cities,
                spots=tuple(spots))


def _hotel_plan(rng, world: World, task: Task, witness: Itinerary) -> tuple[Itinerary, Constraint] | None:
    """Extend a type 2 witness to end at a hotel and require being there at night."""
    city = world.city(task.start.city)
    if not city.hotels:
        return None
    last = witness[-1]
    here = last.place if isinstance(last, Visit) else last.destination
    hotel = rng.choice(city.hotels).name
    routes = city.routes(here, hotel)
    if not routes:
        return None
    route = rng.choice(routes)
    depart = last.end + _five(rng, 0, 30)
    arrive = depart + route.duration_minutes
    if arrive > 1435:
        return None
    check = _five(rng, max(arrive, 1260), 1435)
    extended = Itinerary(witness.actions + (GoToPlace(here, hotel, depart, arrive),))
    return extended, Constraint.make("specific_hotel", city=city.name, hotel=hotel, check_minute=check)


def generate_task(world: World, task_type: int, seed: int, *, objective: str | None = None,
                  params: GenParams | None = None, horizon_days: int | None = None,
                  task_id: str | None = None, suite: str = "", max_attempts: int = 40,
                  calibration_samples: int = CALIBRATION_SAMPLES) -> Task:
    """Witness-first task: build a valid plan, then read the task off it.

    Attempts whose task admits fewer than ``calibration_samples`` distinct
    valid plans are discarded so every generated task can be calibrated.
    """
    if task_type not in (1, 2, 3):
        raise ValueError("task_type must be 1, 2 or 3")
    days = horizon_days or world_horizon_days(world)
    for attempt in range(max_attempts):
        rng = make_rng(seed, "task", task_type, attempt)
        obj = objective or rng.choice(["cost_cents", "total_minutes"])
        tid = task_id or f"t{task_type}-{seed}"
        base = _skeleton(world, task_type, rng, days, obj, tid)
        problem = PlanProblem(world, base)
        actions = decode(problem, _random_genome(problem, rng, waits=rng.random() < 0.5))
        if not actions:
            continue
        witness = Itinerary(actions)
        constraints = _derive_constraints(rng, world, base, witness, params)
        if task_type == 2 and rng.random() < _weight(params, "specific_hotel"):
            extended = _hotel_plan(rng, world, base, witness)
            if extended is not None:
                witness, hotel_rule = extended
                constraints = [c for c in constraints if c.kind != "time_limit"] + [hotel_rule]
                end = witness[-1].end
                if rng.random() < _weight(params, "time_limit"):
                    constraints.append(Constraint.make(
                        "time_limit", deadline=min(base.horizon_end, end + _five(rng, 60, 180))))
        constraints = _target_constraints(base) + constraints
        # drop anything the witness does not satisfy (derivation slack can overshoot)
        kept = []
        for c in constraints:
            trial = replace(base, constraints=tuple(kept + [c]))
            if simulate(world, trial, witness).valid:
                kept.append(c)
        task = replace(base, constraints=tuple(kept), witness=witness, suite=suite)
        task = replace(task, prose=render_prose(task, make_rng(seed, "prose", task_type)))
        if validate_task(task) or not simulate(world, task, witness).valid:
            continue
        if calibration_samples and not _calibratable(world, task, calibration_samples):
            continue
        return task
    raise GenerationError(f"no witness found for a type {task_type} task after {max_attempts} attempts")


def _calibratable(world: World, task: Task, n: int) -> bool:
    try:
        sample_valid(PlanProblem(world, task), n, seed=0)
    except SamplingError:
        return False
    return True


# -- faults ------------------------------------------------------------------

def _has_alternative(world: World, task: Task, node_budget: int = 100_000) -> bool:
    problem = PlanProblem(world, task)
    sol = solve_exact(problem, node_budget)
    if sol.ok or sol.status == "timeout" and sol.objective_value is not None:
        return True
    if sol.status == "timeout":
        return solve_heuristic(problem, 2000, 0).ok
    return False


def inject_fault(world: World, task: Task, fault: str, *, seed: int = 0,
                 witness: Itinerary | None = None) -> World:
    """Break the witness while keeping the task solvable, or raise FaultRejected."""
    if fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    witness = witness if witness is not None else task.witness
    if witness is None:
        raise FaultRejected("task has no witness to break")
    rng = make_rng(seed, "fault", fault, task.id)
    if fault in ("remove_witness_trip", "sellout_witness_ticket"):
        tickets = [a.ticket for a in witness if isinstance(a, GoToCity)]
        if not tickets:
            raise FaultRejected("witness uses no inter-city ticket")
        for ticket in rng.sample(tickets, len(tickets)):
            if fault == "remove_witness_trip":
                trips = [t for t in world.inter_trips if t.ticket_id != ticket]
            else:
                trips = [replace(t, capacity_available=False) if t.ticket_id == ticket else t
                         for t in world.inter_trips]
            faulted = world.replace_trips(trips)
            if _has_alternative(faulted, task):
                return faulted
        raise FaultRejected(f"{fault}: no alternative plan survives")
    visits = [a for a in witness if isinstance(a, Visit)]
    constrained = {c["place"] for c in task.constraints_of("spot_opening_hours")}
    targets = [v for v in visits if v.place in constrained]
    if not targets:
        raise FaultRejected("witness visits no attraction with binding opening hours")
    for v in rng.sample(targets, len(targets)):
        city = world.city(next(c["city"] for c in task.constraints_of("spot_opening_hours")
                               if c["place"] == v.place))
        place = city.place(v.place)
        # close the attraction for the minute-of-day span the witness used
        lo, hi = v.begin % DAY, v.begin % DAY + (v.end - v.begin)
        windows = []
        for a, b in place.opening_windows:
            if b <= lo or a >= hi:
                windows.append((a, b))
                continue
            if a < lo:
                windows.append((a, lo))
            if hi < b:
                windows.append((hi, b))
        windows = [w for w in windows if w[1] - w[0] >= 5] or [(0, 5)]
        new_city = replace(city, places=tuple(replace(p, opening_windows=tuple(windows))
                                              if p.name == v.place else p for p in city.places))
        faulted = world.replace_city(new_city)
        if _has_alternative(faulted, task):
            return faulted
    raise FaultRejected("shift_opening_window: no alternative plan survives")


# -- suites ------------------------------------------------------------------

def type_schedule(count: int, mix: tuple[int, int, int] = TYPE_MIX) -> list[int]:
    """Task types for a suite of ``count`` tasks, proportional to ``mix``.

    Largest-remainder apportionment, then interleaved so any prefix keeps
    roughly the same ratio.
    """
    total = sum(mix)
    quotas = [count * m / total for m in mix]
    counts = [int(q) for q in quotas]
    for i in sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), i))[: count - sum(counts)]:
        counts[i] += 1
    out, placed = [], [0, 0, 0]
    for n in range(count):
        i = max(range(3), key=lambda i: (counts[i] * (n + 1) / count - placed[i], -i)
                if placed[i] < counts[i] else (-1e9, -i))
        placed[i] += 1
        out.append(i + 1)
    return out


@dataclass
class SuiteEntry:
    task: Task
    world: World
    fault: str | None = None


def generate_suite(name: str, count: int, seed: int, *, params: GenParams | None = None,
                   mix: tuple[int, int, int] = TYPE_MIX, fault: str | None = None,
                   max_tries: int = 50) -> list[SuiteEntry]:
    """Each task gets its own world, derived from ``(seed, index)``.

    With ``fault`` set, the fault breaks the plan the default planner would
    follow, and tasks whose fault is rejected are replaced by the next seed.
    Ticket faults only apply to types 1 and 3.
    """
    from .orchestrator.core import planned_itinerary

    base = params or GenParams(num_cities=3, attractions_per_city=3, trips_per_city_pair=3)
    if fault in ("remove_witness_trip", "sellout_witness_ticket"):
        mix = (mix[0], 0, mix[2])  # type 2 plans use no tickets
    types = type_schedule(count, mix)
    out: list[SuiteEntry] = []
    offset = 0
    for i, task_type in enumerate(types):
        for _ in range(max_tries):
            sub = make_rng(seed, "suite", name, i, offset).randrange(2 ** 31)
            offset += 1
            world = generate_world(replace(base, seed=sub))
            try:
                task = generate_task(world, task_type, sub, params=base, task_id=f"{name}-{i:03d}",
                                     suite=name)
            except GenerationError:
                continue
            if fault is None:
                out.append(SuiteEntry(task, world))
                break
            plan = planned_itinerary(world, task)
            if plan is None:
                continue
            try:
                faulted = inject_fault(world, task, fault, seed=sub, witness=plan)
            except FaultRejected:
                continue
            out.append(SuiteEntry(task, faulted, fault))
            break
        else:
            raise GenerationError(f"no usable type {task_type} task after {max_tries} tries")
    return out


def write_suite(entries: list[SuiteEntry], out_dir: str | Path, name: str) -> Path:
    """Write world/task files and a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for e in entries:
        wpath = out / f"{e.task.id}.world.json"
        tpath = out / f"{e.task.id}.task.json"
        wpath.write_text(e.world.to_json())
        tpath.write_text(e.task.to_json())
        rows.append({"id": e.task.id, "type": e.task.task_type, "world": wpath.name,
                     "task": tpath.name, "fault": e.fault, "calibration": None})
    manifest = out / f"{name}.suite.json"
    manifest.write_text(json.dumps({"suite": name, "tasks": rows}, indent=2) + "\n")
    return manifest


def load_suite(manifest: str | Path) -> list[tuple[dict, World, Task]]:
    from .task import load_task
    from .world import load_world

    path = Path(manifest)
    data = json.loads(path.read_text())
    return [(row, load_world(path.parent / row["world"]), load_task(path.parent / row["task"]))
            for row in data["tasks"]]


def params_to_dict(params: GenParams) -> dict:
    return asdict(params)


__all__ = [
    "FAULTS", "TYPE_MIX", "FaultRejected", "GenParams", "GenerationError", "SuiteEntry",
    "generate_suite", "generate_task", "generate_world", "inject_fault", "load_suite",
    "render_prose", "type_schedule", "world_horizon_days", "write_suite",
]
