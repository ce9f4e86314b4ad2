"""Independent reference implementations used only by the tests.

Nothing here imports the solver.  The brute-force planner enumerates every
city order, every trip, every attraction order and every local route, places
each action at the first feasible point of a 5-minute grid (found by scanning
the grid, not by computing window boundaries) and lets the simulator judge
the finished plan.  Placing actions as early as possible loses nothing
because waiting is free and no rule rewards a later start.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from travelsim.itinerary import GoToCity, GoToPlace, Itinerary, StayIn, Visit
from travelsim.simulator import simulate

DAY = 1440
GRID = 5


def _windows(task, kind):
    return [(c["start_minute"], c["end_minute"]) for c in task.constraints if c.kind == kind]


def _spans(window, s, e):
    a, b = window
    length = b - a if a <= b else DAY - a + b
    for d in range(s // DAY - 1, e // DAY + 1):
        yield d * DAY + a, d * DAY + a + length


def _inside(window, s, e):
    return any(lo <= s and e <= hi for lo, hi in _spans(window, s, e))


def _clear(window, s, e):
    return all(not (s < hi and lo < e) for lo, hi in _spans(window, s, e))


class BruteForce:
    def __init__(self, world, task):
        self.world, self.task = world, task
        cons = task.constraints
        self.deadline = min([task.horizon_end] + [c["deadline"] for c in cons if c.kind == "time_limit"])
        mode_sets = [set(c["modes"]) for c in cons if c.kind == "transportation"]
        self.modes = set.intersection(*mode_sets) if mode_sets else None
        self.rest = _windows(task, "rest_time")
        self.activity = _windows(task, "activity_time")
        self.opening = {(c["city"], c["place"]) for c in cons if c.kind == "spot_opening_hours"}
        self.hotel = {c["city"]: c["hotel"] for c in cons if c.kind == "specific_hotel"}
        self.stay = {}
        for t in task.cities:
            self.stay[t.city] = max(self.stay.get(t.city, 0), t.stay_minutes)
        for c in cons:
            if c.kind == "city_duration":
                self.stay[c["city"]] = max(self.stay.get(c["city"], 0), c["min_minutes"])
        need = {}
        for s in task.spots:
            need[(s.city, s.place)] = max(need.get((s.city, s.place), 0), s.visit_minutes)
        for c in cons:
            if c.kind == "spot_duration":
                need[(c["city"], c["place"])] = max(need.get((c["city"], c["place"]), 0), c["min_minutes"])
            if c.kind == "spot_opening_hours":
                need.setdefault((c["city"], c["place"]), 0)
        self.spots = {}
        for (city, place), m in need.items():
            p = world.city(city).place(place)
            self.spots.setdefault(city, []).append((place, max(m, p.min_visit_minutes, 1)))
        order = []
        for city in [t.city for t in task.cities] + [s.city for s in task.spots] + list(self.stay) + list(self.spots):
            if city not in order:
                order.append(city)
        self.cities = order

    # grid scans

    def _move_at(self, t, length):
        s = t
        while s + length <= self.deadline:
            if all(_clear(w, s, s + length) for w in self.rest):
                return s
            s += GRID
        return None

    def _visit_at(self, city, place, t, length):
        p = self.world.city(city).place(place)
        s = t
        while s + length <= self.deadline:
            e = s + length
            ok = all(_clear(w, s, e) for w in self.rest) and all(_inside(w, s, e) for w in self.activity)
            if ok and (city, place) in self.opening:
                ok = any(_inside(w, s, e) for w in p.opening_windows)
            if ok:
                return s
            s += GRID
        return None

    # enumeration

    def _blocks(self, city, place, clock):
        """Every way through a city's block: (actions, place, clock)."""
        results = []
        c = self.world.city(city)

        def walk(order, place, clock, acc):
            if not order:
                tail(place, clock, acc)
                return
            target, length = order[0]
            options = [None] if place == target else list(c.routes(place, target))
            for r in options:
                p, t, a = place, clock, list(acc)
                if r is not None:
                    s = self._move_at(t, r.duration_minutes)
                    if s is None:
                        continue
                    a.append(GoToPlace(p, target, s, s + r.duration_minutes))
                    p, t = target, s + r.duration_minutes
                s = self._visit_at(city, target, t, length)
                if s is None:
                    continue
                walk(order[1:], target, s + length, a + [Visit(target, s, s + length)])

        def tail(place, clock, acc):
            stay = self.stay.get(city, 0)
            if stay:
                if clock + stay > self.deadline:
                    return
                acc = acc + [StayIn(city, clock, clock + stay)]
                clock += stay
            hotel = self.hotel.get(city)
            if hotel is None or hotel == place:
                results.append((acc, place, clock))
                return
            for r in c.routes(place, hotel):
                s = self._move_at(clock, r.duration_minutes)
                if s is not None:
                    results.append((acc + [GoToPlace(place, hotel, s, s + r.duration_minutes)], hotel,
                                    s + r.duration_minutes))

        for order in itertools.permutations(self.spots.get(city, [])):
            walk(list(order), place, clock, [])
        return results

    def plans(self):
        start = self.task.start
        first = [([], start.place, start.time)]
        if start.city in self.cities:
            first = self._blocks(start.city, start.place, start.time)
        others = [c for c in self.cities if c != start.city]

        for acts, _, clock in first:
            for order in itertools.permutations(others):
                yield from self._ordered(start.city, clock, list(order), acts)

    def _ordered(self, city, clock, order, acc):
        if not order:
            yield acc
            return
        dest = order[0]
        for t in self.world.inter_trips:
            if (t.origin_city, t.dest_city) != (city, dest) or not t.capacity_available:
                continue
            if t.depart < clock or t.arrive > self.deadline:
                continue
            if self.modes is not None and t.mode not in self.modes:
                continue
            ride = GoToCity(city, dest, t.depart, t.arrive, t.ticket_id)
            hub = self.world.city(dest).start_place
            for acts, _, after in self._blocks(dest, hub, t.arrive):
                yield from self._ordered(dest, after, order[1:], acc + [ride] + acts)

    def optimum(self):
        best = None
        for actions in self.plans():
            if not actions:
                continue
            trace = simulate(self.world, self.task, Itinerary(tuple(actions)))
            if trace.valid:
                v = trace.objective_value(self.task.objective)
                best = v if best is None else min(best, v)
        return best


def brute_force_optimum(world, task):
    """Minimum objective over every enumerated valid plan, or None."""
    return BruteForce(world, task).optimum()


def band_by_isqrt(values):
    """Mean and population deviation, with the square root taken by integer arithmetic.

    The deviation is the float nearest to the exact root: an integer root at
    high scale brackets it, and the bracket is far narrower than float spacing.
    """
    n = len(values)
    mu = Fraction(sum(values), n)
    var = sum((Fraction(v) - mu) ** 2 for v in values) / n
    scale = 10 ** 40
    root = math.isqrt(var.numerator * scale * scale // var.denominator)
    sigma = Fraction(float(Fraction(root, scale)))
    return mu - sigma, mu + sigma, mu, sigma


def topk_linear(skills, query, k, similarity):
    """Top-k by a plain scan: repeatedly take the best remaining, first index wins ties."""
    remaining = list(enumerate(skills))
    out = []
    while remaining and len(out) < k:
        best = None
        for i, s in remaining:
            score = similarity(query, s.detail)
            if best is None or score > best[0]:
                best = (score, i, s)
        out.append(best[2])
        remaining = [(i, s) for i, s in remaining if i != best[1]]
    return out
