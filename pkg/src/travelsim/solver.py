"""Feasibility-first itinerary construction.

Plans are built city block by city block.  Inside a block the traveller visits
the block's target attractions in some order, then stays for the required
duration, then heads to the required hotel.  Every action starts at the
earliest moment that respects rest windows, opening hours, activity hours and
the deadline.  Waiting is free, so an earlier start never hurts any later
step; the earliest start therefore dominates every later start on the same
choice sequence and the search only branches over orders, trips and routes.

:func:`solve_exact` enumerates that space with branch-and-bound,
:func:`solve_heuristic` runs greedy construction plus local search over a
plan encoding, and :func:`sample_valid` draws randomized valid plans.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from functools import cached_property

from .itinerary import GoToCity, GoToPlace, Itinerary, StayIn, Visit, render_action
from .rng import make_rng
from .simulator import simulate
from .task import Task
from .timeutil import DAY, occurrences, overlaps
from .world import InterCityTrip, World, ticket_mode

STATUSES = ("optimal", "feasible", "infeasible", "timeout")


class SamplingError(RuntimeError):
    def __init__(self, message: str, found: list):
        super().__init__(message)
        self.found = found


@dataclass(frozen=True)
class Solution:
    itinerary: Itinerary
    objective_value: int | None
    status: str
    nodes: int = 0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


@dataclass(frozen=True)
class Frontier:
    city: str
    place: str
    clock: int
    spent: int = 0


@dataclass
class PlanProblem:
    """A task plus the knobs agents and fault studies need.

    ``respect_availability=False`` plans against the published timetable, as
    an agent that has not tried to book yet would.
    """

    world: World
    task: Task
    excluded_tickets: frozenset = frozenset()
    respect_availability: bool = True

    # -- derived parameters ------------------------------------------------

    @property
    def objective(self) -> str:
        return self.task.objective

    @cached_property
    def deadline(self) -> int:
        limits = [c["deadline"] for c in self.task.constraints_of("time_limit")]
        return min([self.task.horizon_end] + limits)

    @cached_property
    def budget(self) -> int | None:
        caps = [c["max_cents"] for c in self.task.constraints_of("budget")]
        return min(caps) if caps else None

    @cached_property
    def modes(self) -> set[str] | None:
        sets = [set(c["modes"]) for c in self.task.constraints_of("transportation")]
        return set.intersection(*sets) if sets else None

    @cached_property
    def activity_windows(self) -> list[tuple[int, int]]:
        return [(c["start_minute"], c["end_minute"]) for c in self.task.constraints_of("activity_time")]

    @cached_property
    def rest_windows(self) -> list[tuple[int, int]]:
        return [(c["start_minute"], c["end_minute"]) for c in self.task.constraints_of("rest_time")]

    @cached_property
    def stays(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.task.cities:
            out[c.city] = max(out.get(c.city, 0), c.stay_minutes)
        for c in self.task.constraints_of("city_duration"):
            out[c["city"]] = max(out.get(c["city"], 0), c["min_minutes"])
        return out

    @cached_property
    def spots(self) -> dict[str, list[tuple[str, int]]]:
        """city -> [(place, minutes)] in declaration order."""
        need: dict[tuple[str, str], int] = {}
        for s in self.task.spots:
            need[(s.city, s.place)] = max(need.get((s.city, s.place), 0), s.visit_minutes)
        for c in self.task.constraints_of("spot_duration"):
            key = (c["city"], c["place"])
            need[key] = max(need.get(key, 0), c["min_minutes"])
        for c in self.task.constraints_of("spot_opening_hours"):
            need.setdefault((c["city"], c["place"]), 0)
        out: dict[str, list[tuple[str, int]]] = {}
        for (city, place), minutes in need.items():
            wc = self.world.city(city)
            p = wc.place(place) if wc else None
            floor = p.min_visit_minutes if p is not None else 0
            out.setdefault(city, []).append((place, max(minutes, floor, 1)))
        return out

    @cached_property
    def opening_rules(self) -> set[tuple[str, str]]:
        """Attractions whose opening hours are binding for this task."""
        return {(c["city"], c["place"]) for c in self.task.constraints_of("spot_opening_hours")}

    @cached_property
    def hotels(self) -> dict[str, str]:
        return {c["city"]: c["hotel"] for c in self.task.constraints_of("specific_hotel")}

    @cached_property
    def block_cities(self) -> list[str]:
        """Cities that need a block, in declaration order."""
        out = list(self.task.target_cities)
        for city in list(self.stays) + list(self.spots):
            if city not in out:
                out.append(city)
        return out

    @property
    def start(self) -> Frontier:
        s = self.task.start
        return Frontier(s.city, s.place, s.time, 0)

    @cached_property
    def start_block(self) -> bool:
        return self.task.start.city in self.block_cities

    @cached_property
    def travel_cities(self) -> list[str]:
        return [c for c in self.block_cities if c != self.task.start.city]

    # -- primitives --------------------------------------------------------

    def trip_usable(self, trip: InterCityTrip) -> bool:
        if trip.ticket_id in self.excluded_tickets:
            return False
        if self.respect_availability and not trip.capacity_available:
            return False
        if self.modes is not None and ticket_mode(trip.ticket_id) not in self.modes:
            return False
        return True

    @cached_property
    def _trips_by_pair(self) -> dict[tuple[str, str], list[InterCityTrip]]:
        out: dict[tuple[str, str], list[InterCityTrip]] = {}
        for t in self.world.inter_trips:
            if self.trip_usable(t):
                out.setdefault((t.origin_city, t.dest_city), []).append(t)
        for v in out.values():
            v.sort(key=lambda t: (t.depart, t.ticket_id))
        return out

    def trips(self, origin: str, dest: str, ready: int) -> list[InterCityTrip]:
        return [t for t in self._trips_by_pair.get((origin, dest), ())
                if t.depart >= ready and t.arrive <= self.deadline]

    def ranked_trips(self, origin: str, dest: str, ready: int) -> list[InterCityTrip]:
        found = self.trips(origin, dest, ready)
        if self.objective == "cost_cents":
            return sorted(found, key=lambda t: (t.price, t.arrive, t.depart, t.ticket_id))
        return sorted(found, key=lambda t: (t.arrive, t.price, t.depart, t.ticket_id))

    def ranked_routes(self, city: str, origin: str, dest: str):
        wc = self.world.city(city)
        routes = list(wc.routes(origin, dest)) if wc else []
        if self.objective == "cost_cents":
            routes.sort(key=lambda r: (r.price, r.duration_minutes))
        else:
            routes.sort(key=lambda r: (r.duration_minutes, r.price))
        # drop routes dominated on both price and duration
        kept = []
        for r in routes:
            if not any(k.price <= r.price and k.duration_minutes <= r.duration_minutes for k in kept):
                kept.append(r)
        return kept

    def _clear_of_rest(self, s: int, e: int) -> bool:
        for w in self.rest_windows:
            for lo, hi in occurrences(w, s, e):
                if overlaps(s, e, lo, hi):
                    return False
        return True

    def _rest_ends(self, t: int, limit: int) -> list[int]:
        return [hi for w in self.rest_windows for _, hi in occurrences(w, t, limit) if hi >= t]

    def fit_move(self, t: int, duration: int) -> int | None:
        """Earliest start >= t of a local trip that avoids rest windows."""
        for s in sorted({t, *self._rest_ends(t, self.deadline)}):
            if s + duration > self.deadline:
                return None
            if self._clear_of_rest(s, s + duration):
                return s
        return None

    def fit_visit(self, city: str, place: str, t: int, duration: int) -> int | None:
        """Earliest start >= t of a visit that fits opening, activity and rest windows."""
        wc = self.world.city(city)
        p = wc.place(place) if wc else None
        if p is None or not p.is_attraction:
            return None
        if (city, place) in self.opening_rules:
            opens = [occ for w in p.opening_windows for occ in occurrences(w, t, self.deadline)]
        else:
            opens = [(t, self.deadline)]
        acts = [[occ for occ in occurrences(w, t, self.deadline)] for w in self.activity_windows]
        candidates = {t, *self._rest_ends(t, self.deadline)}
        candidates.update(lo for lo, _ in opens if lo >= t)
        for group in acts:
            candidates.update(lo for lo, _ in group if lo >= t)
        for s in sorted(candidates):
            e = s + duration
            if e > self.deadline:
                return None
            if not any(lo <= s and e <= hi for lo, hi in opens):
                continue
            if not all(any(lo <= s and e <= hi for lo, hi in group) for group in acts):
                continue
            if self._clear_of_rest(s, e):
                return s
        return None

    def objective_of(self, clock: int, spent: int) -> int:
        return spent if self.objective == "cost_cents" else clock - self.task.start.time


# -- plan building blocks ---------------------------------------------------

@dataclass(frozen=True)
class _State:
    city: str
    place: str
    clock: int
    spent: int


def _hop(problem: PlanProblem, st: _State, dest: str, route, wait: int = 0):
    s = problem.fit_move(st.clock + wait, route.duration_minutes)
    if s is None:
        return None
    e = s + route.duration_minutes
    return (GoToPlace(st.place, dest, s, e), _State(st.city, dest, e, st.spent + route.price))


def _visit(problem: PlanProblem, st: _State, place: str, minutes: int, wait: int = 0):
    s = problem.fit_visit(st.city, place, st.clock + wait, minutes)
    if s is None:
        return None
    price = problem.world.city(st.city).place(place).visit_price
    return (Visit(place, s, s + minutes), _State(st.city, place, s + minutes, st.spent + price))


def _ride(trip: InterCityTrip, st: _State, world: World):
    dest = world.city(trip.dest_city)
    return (GoToCity(trip.origin_city, trip.dest_city, trip.depart, trip.arrive, trip.ticket_id),
            _State(trip.dest_city, dest.start_place, trip.arrive, st.spent + trip.price))


def _stay(problem: PlanProblem, st: _State, wait: int = 0, extra: int = 0):
    minutes = problem.stays.get(st.city, 0)
    if minutes <= 0:
        return [], st
    minutes += extra
    s = st.clock + wait
    if s + minutes > problem.deadline:
        return None
    return [StayIn(st.city, s, s + minutes)], _State(st.city, st.place, s + minutes, st.spent)


def _within_limits(problem: PlanProblem, st: _State) -> bool:
    if st.clock > problem.deadline:
        return False
    return problem.budget is None or st.spent <= problem.budget


def _plan_key(problem: PlanProblem, actions: tuple, objective: int) -> tuple:
    sd = problem.task.start_date
    return (objective, len(actions), tuple(render_action(a, sd) for a in actions))


def _verify(problem: PlanProblem, actions) -> int | None:
    """Objective value of a fully valid plan, else None."""
    it = Itinerary(tuple(actions))
    world = problem.world
    if not problem.respect_availability or problem.excluded_tickets:
        # check against the world the agent believes in
        trips = [t for t in world.inter_trips if t.ticket_id not in problem.excluded_tickets]
        if not problem.respect_availability:
            trips = [t if t.capacity_available else _available(t) for t in trips]
        world = world.replace_trips(trips)
    trace = simulate(world, problem.task, it)
    if not trace.valid:
        return None
    return trace.objective_value(problem.objective)


def _available(trip: InterCityTrip) -> InterCityTrip:
    return InterCityTrip(trip.ticket_id, trip.origin_city, trip.dest_city, trip.depart,
                         trip.arrive, trip.price, True)


# -- exact search ------------------------------------------------------------

class _Budget(Exception):
    pass


def solve_exact(problem: PlanProblem, node_budget: int = 200_000) -> Solution:
    """Exhaustive branch-and-bound over city orders, trips, attraction orders and routes.

    Returns the objective-minimal valid plan (ties: fewer actions, then the
    lexicographically smallest rendering), ``infeasible`` when the space is
    exhausted without a valid plan, or ``timeout`` with the best plan so far.
    """
    if node_budget <= 0:
        raise ValueError("node_budget must be positive")
    best: list = [None]  # (key, actions)
    nodes = [0]

    def tick():
        nodes[0] += 1
        if nodes[0] > node_budget:
            raise _Budget

    def bound_ok(st: _State) -> bool:
        if not _within_limits(problem, st):
            return False
        if best[0] is None:
            return True
        return problem.objective_of(st.clock, st.spent) <= best[0][0][0]

    def block(st: _State, city: str):
        """Yield (actions, state) for every way to complete the block in ``city``."""
        todo = problem.spots.get(city, [])
        for order in itertools.permutations(todo):
            yield from _block_visits(st, city, list(order), ())

    def _block_visits(st, city, order, acc):
        tick()
        if not bound_ok(st):
            return
        if not order:
            yield from _block_tail(st, city, acc)
            return
        place, minutes = order[0]
        hops = [None] if st.place == place else problem.ranked_routes(city, st.place, place)
        for route in hops:
            cur, acts = st, acc
            if route is not None:
                step = _hop(problem, cur, place, route)
                if step is None:
                    continue
                acts, cur = acts + (step[0],), step[1]
            step = _visit(problem, cur, place, minutes)
            if step is None:
                continue
            yield from _block_visits(step[1], city, order[1:], acts + (step[0],))

    def _block_tail(st, city, acc):
        stayed = _stay(problem, st)
        if stayed is None:
            return
        acts, st = acc + tuple(stayed[0]), stayed[1]
        hotel = problem.hotels.get(city)
        if hotel is None or st.place == hotel:
            if bound_ok(st):
                yield acts, st
            return
        for route in problem.ranked_routes(city, st.place, hotel):
            step = _hop(problem, st, hotel, route)
            if step is not None and bound_ok(step[1]):
                yield acts + (step[0],), step[1]

    def leaf(actions: tuple):
        value = _verify(problem, actions)
        if value is None:
            return
        key = _plan_key(problem, actions, value)
        if best[0] is None or key < best[0][0]:
            best[0] = (key, actions)

    def tour(st: _State, remaining: tuple, acc: tuple):
        tick()
        if not remaining:
            leaf(acc)
            return
        for city in remaining:
            rest = tuple(c for c in remaining if c != city)
            for trip in problem.ranked_trips(st.city, city, st.clock):
                act, arrived = _ride(trip, st, problem.world)
                if not bound_ok(arrived):
                    continue
                for acts, after in block(arrived, city):
                    tour(after, rest, acc + (act,) + acts)

    s0 = problem.start
    st0 = _State(s0.city, s0.place, s0.clock, s0.spent)
    status = "optimal"
    try:
        if problem.start_block:
            for acts, after in block(st0, st0.city):
                tour(after, tuple(problem.travel_cities), acts)
        else:
            tour(st0, tuple(problem.travel_cities), ())
    except _Budget:
        status = "timeout"
    if best[0] is None:
        return Solution(Itinerary(), None, "infeasible" if status == "optimal" else "timeout", nodes[0])
    (value, _, _), actions = best[0]
    return Solution(Itinerary(actions), value, status, nodes[0])


# -- plan encoding for the heuristic and the sampler --------------------------

@dataclass
class Genome:
    order: list[str]
    spot_orders: dict[str, list[str]]
    trip_rank: dict[int, int] = field(default_factory=dict)
    route_rank: dict[tuple[str, str, str], int] = field(default_factory=dict)
    waits: dict[int, int] = field(default_factory=dict)
    # extra minutes spent in a city beyond the required stay
    lingers: dict[str, int] = field(default_factory=dict)

    def copy(self) -> "Genome":
        return Genome(list(self.order), {k: list(v) for k, v in self.spot_orders.items()},
                      dict(self.trip_rank), dict(self.route_rank), dict(self.waits), dict(self.lingers))


def decode(problem: PlanProblem, genome: Genome) -> tuple | None:
    """Build the plan a genome describes, or None when a step has no option."""
    minutes = {c: dict(v) for c, v in problem.spots.items()}
    slot = itertools.count()
    s0 = problem.start
    st = _State(s0.city, s0.place, s0.clock, s0.spent)
    actions: list = []

    def run_block(st: _State, city: str):
        for place in genome.spot_orders.get(city, []):
            if st.place != place:
                routes = problem.ranked_routes(city, st.place, place)
                if not routes:
                    return None
                r = routes[min(genome.route_rank.get((city, st.place, place), 0), len(routes) - 1)]
                step = _hop(problem, st, place, r, genome.waits.get(next(slot), 0))
                if step is None:
                    return None
                actions.append(step[0])
                st = step[1]
            step = _visit(problem, st, place, minutes[city][place], genome.waits.get(next(slot), 0))
            if step is None:
                return None
            actions.append(step[0])
            st = step[1]
        stayed = _stay(problem, st, genome.waits.get(next(slot), 0), genome.lingers.get(city, 0))
        if stayed is None:
            return None
        actions.extend(stayed[0])
        st = stayed[1]
        hotel = problem.hotels.get(city)
        if hotel is not None and st.place != hotel:
            routes = problem.ranked_routes(city, st.place, hotel)
            if not routes:
                return None
            r = routes[min(genome.route_rank.get((city, st.place, hotel), 0), len(routes) - 1)]
            step = _hop(problem, st, hotel, r, genome.waits.get(next(slot), 0))
            if step is None:
                return None
            actions.append(step[0])
            st = step[1]
        return st

    if problem.start_block:
        st = run_block(st, st.city)
        if st is None:
            return None
    for leg, city in enumerate(genome.order):
        options = problem.ranked_trips(st.city, city, st.clock)
        if not options:
            return None
        act, st = _ride(options[min(genome.trip_rank.get(leg, 0), len(options) - 1)], st, problem.world)
        actions.append(act)
        st = run_block(st, city)
        if st is None:
            return None
    return tuple(actions)


def _greedy_genome(problem: PlanProblem) -> Genome:
    """Nearest-next city order and earliest-closing-first attraction order."""
    order: list[str] = []
    remaining = list(problem.travel_cities)
    cur, clock = problem.task.start.city, problem.task.start.time
    while remaining:
        def score(city):
            trips = problem.ranked_trips(cur, city, clock)
            if not trips:
                return (1, 0, city)
            t = trips[0]
            return (0, t.price if problem.objective == "cost_cents" else t.arrive, city)
        nxt = min(remaining, key=score)
        trips = problem.ranked_trips(cur, nxt, clock)
        if trips:
            clock = trips[0].arrive
        order.append(nxt)
        remaining.remove(nxt)
        cur = nxt

    def closing(city, place):
        p = problem.world.city(city).place(place)
        return (min((w[1] for w in p.opening_windows), default=DAY), place)

    spot_orders = {city: sorted((p for p, _ in spots), key=lambda p: closing(city, p))
                   for city, spots in problem.spots.items()}
    return Genome(order, spot_orders)


def _random_genome(problem: PlanProblem, rng: random.Random, *, waits: bool) -> Genome:
    order = list(problem.travel_cities)
    rng.shuffle(order)
    spot_orders = {}
    for city, spots in problem.spots.items():
        places = [p for p, _ in spots]
        rng.shuffle(places)
        spot_orders[city] = places
    g = Genome(order, spot_orders)
    for leg in range(len(order)):
        g.trip_rank[leg] = 0 if rng.random() < 0.5 else rng.randint(0, 3)
    for city, wc_spots in problem.spots.items():
        wc = problem.world.city(city)
        for r in wc.intra_routes if wc else ():
            g.route_rank[(city, r.origin, r.destination)] = rng.randint(0, 1)
    if waits:
        for s in range(4 * (len(order) + sum(len(v) for v in problem.spots.values()) + 2)):
            if rng.random() < 0.35:
                g.waits[s] = 5 * rng.randint(1, 12)
        for city in problem.stays:
            if rng.random() < 0.5:
                g.lingers[city] = 5 * rng.randint(1, 24)
    return g


def _neighbours(problem: PlanProblem, g: Genome):
    for i in range(len(g.order) - 1):
        n = g.copy()
        n.order[i], n.order[i + 1] = n.order[i + 1], n.order[i]
        yield n
    for city, places in g.spot_orders.items():
        for i in range(len(places) - 1):
            n = g.copy()
            p = n.spot_orders[city]
            p[i], p[i + 1] = p[i + 1], p[i]
            yield n
    for leg in range(len(g.order)):
        for delta in (1, -1):
            rank = g.trip_rank.get(leg, 0) + delta
            if 0 <= rank <= 5:
                n = g.copy()
                n.trip_rank[leg] = rank
                yield n
    for city, places in g.spot_orders.items():
        wc = problem.world.city(city)
        keys = {(city, r.origin, r.destination) for r in (wc.intra_routes if wc else ())
                if r.destination in places or r.destination == problem.hotels.get(city)}
        for key in sorted(keys):
            n = g.copy()
            n.route_rank[key] = 1 - min(g.route_rank.get(key, 0), 1)
            yield n
    for s in sorted(g.waits):
        n = g.copy()
        n.waits[s] = max(0, g.waits[s] - 5)
        yield n


def _evaluate_genome(problem: PlanProblem, g: Genome):
    actions = decode(problem, g)
    if actions is None:
        return None
    value = _verify(problem, actions)
    if value is None:
        return None
    return _plan_key(problem, actions, value), actions


def solve_heuristic(problem: PlanProblem, time_budget_ms: int = 2000, seed: int = 0,
                    restarts: int = 8, max_steps: int = 500) -> Solution:
    """Greedy construction followed by first-improvement local search.

    Restarts use seeded random orders.  The wall-clock budget is only a
    safety stop; on the instance sizes this package generates the search
    reaches local optima first, so results are deterministic for a seed.
    """
    deadline = time.monotonic() + time_budget_ms / 1000
    best = None
    steps = 0
    timed_out = False
    starts = [_greedy_genome(problem)]
    for r in range(restarts):
        starts.append(_random_genome(problem, make_rng(seed, "restart", r), waits=False))
    for g in starts:
        current = _evaluate_genome(problem, g)
        improved = True
        while improved:
            improved = False
            for n in _neighbours(problem, g):
                steps += 1
                if time.monotonic() > deadline or steps > max_steps * len(starts):
                    timed_out = True
                    break
                cand = _evaluate_genome(problem, n)
                if cand is not None and (current is None or cand[0] < current[0]):
                    g, current, improved = n, cand, True
                    break
            if timed_out:
                break
        if current is not None and (best is None or current[0] < best[0]):
            best = current
        if timed_out:
            break
    if best is None:
        return Solution(Itinerary(), None, "timeout" if timed_out else "infeasible", steps)
    return Solution(Itinerary(best[1]), best[0][0], "feasible", steps)


def sample_valid(problem: PlanProblem, n: int, seed: int = 0,
                 max_attempts: int | None = None) -> list[Solution]:
    """``n`` distinct valid plans from randomized restarts, each re-simulated."""
    if n <= 0:
        return []
    max_attempts = max_attempts or 200 * n + 200
    found: list[Solution] = []
    seen: set = set()
    for attempt in range(max_attempts):
        rng = make_rng(seed, "sample", attempt)
        g = _random_genome(problem, rng, waits=attempt % 4 != 0)
        actions = decode(problem, g)
        if actions is None or actions in seen:
            continue
        value = _verify(problem, actions)
        if value is None:
            continue
        seen.add(actions)
        found.append(Solution(Itinerary(actions), value, "feasible"))
        if len(found) == n:
            return found
    raise SamplingError(f"only {len(found)} of {n} distinct valid plans found", found)


def solver_sampler(world: World, task: Task, count: int, seed: int) -> list[Itinerary]:
    """Sampler for :func:`travelsim.evaluator.calibrate`."""
    try:
        sols = sample_valid(PlanProblem(world, task), count, seed)
    except SamplingError as exc:
        sols = exc.found
    return [s.itinerary for s in sols]


def solve(problem: PlanProblem, node_budget: int = 200_000, time_budget_ms: int = 2000,
          seed: int = 0) -> Solution:
    """Exact search, falling back to the heuristic when the node budget runs out."""
    sol = solve_exact(problem, node_budget)
    if sol.status in ("optimal", "infeasible"):
        return sol
    heur = solve_heuristic(problem, time_budget_ms, seed)
    if sol.objective_value is not None and (heur.objective_value is None
                                            or sol.objective_value <= heur.objective_value):
        return Solution(sol.itinerary, sol.objective_value, "feasible", sol.nodes)
    return heur
