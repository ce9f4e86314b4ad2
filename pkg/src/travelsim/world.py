"""Cities, attractions and transport, plus the database queries agents use."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

from .timeutil import DAY, TimeFormatError, check_date, parse_time, render_time

NAME_RE = re.compile(r"^[\w\-]+(?: [\w\-]+)*$")

PLACE_KINDS = ("attraction", "station", "hotel", "generic")


class WorldError(ValueError):
    """Raised for malformed or invalid world data."""

    def __init__(self, message: str, defects: list[str] | None = None):
        self.defects = list(defects or [])
        if self.defects:
            message = message + ": " + "; ".join(self.defects)
        super().__init__(message)


class UnknownEntityError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown entity"


class NotAnAttractionError(ValueError):
    pass


@dataclass(frozen=True)
class Place:
    name: str
    kind: str = "generic"
    opening_windows: tuple[tuple[int, int], ...] = ()
    min_visit_minutes: int = 0
    visit_price: int = 0

    @property
    def is_attraction(self) -> bool:
        return self.kind == "attraction"


@dataclass(frozen=True)
class IntraRoute:
    origin: str
    destination: str
    duration_minutes: int
    price: int


@dataclass(frozen=True)
class InterCityTrip:
    ticket_id: str
    origin_city: str
    dest_city: str
    depart: int
    arrive: int
    price: int
    capacity_available: bool = True

    @property
    def mode(self) -> str:
        return ticket_mode(self.ticket_id)


def ticket_mode(ticket_id: str) -> str:
    """Transport mode of a ticket: its leading letters (``"G2305"`` -> ``"G"``)."""
    m = re.match(r"[A-Za-z]*", ticket_id)
    return m.group(0) if m else ""


@dataclass(frozen=True)
class City:
    name: str
    start_place: str
    places: tuple[Place, ...] = ()
    intra_routes: tuple[IntraRoute, ...] = ()

    @cached_property
    def _place_index(self) -> dict[str, Place]:
        return {p.name: p for p in self.places}

    @cached_property
    def _route_index(self) -> dict[tuple[str, str], tuple[IntraRoute, ...]]:
        index: dict[tuple[str, str], list[IntraRoute]] = {}
        for r in self.intra_routes:
            index.setdefault((r.origin, r.destination), []).append(r)
        return {k: tuple(v) for k, v in index.items()}

    def place(self, name: str) -> Place | None:
        return self._place_index.get(name)

    def routes(self, origin: str, destination: str) -> tuple[IntraRoute, ...]:
        return self._route_index.get((origin, destination), ())

    @property
    def attractions(self) -> list[Place]:
        return [p for p in self.places if p.is_attraction]

    @property
    def hotels(self) -> list[Place]:
        return [p for p in self.places if p.kind == "hotel"]


@dataclass(frozen=True)
class World:
    start_date: str
    cities: tuple[City, ...] = ()
    inter_trips: tuple[InterCityTrip, ...] = ()
    seed: int = 0

    @cached_property
    def _city_index(self) -> dict[str, City]:
        return {c.name: c for c in self.cities}

    @cached_property
    def _trip_index(self) -> dict[str, InterCityTrip]:
        return {t.ticket_id: t for t in self.inter_trips}

    def city(self, name: str) -> City | None:
        return self._city_index.get(name)

    def trip(self, ticket_id: str) -> InterCityTrip | None:
        return self._trip_index.get(ticket_id)

    @property
    def city_names(self) -> list[str]:
        return [c.name for c in self.cities]

    def replace_trips(self, trips: Iterable[InterCityTrip]) -> "World":
        return World(self.start_date, self.cities, tuple(trips), self.seed)

    def replace_city(self, city: City) -> "World":
        cities = tuple(city if c.name == city.name else c for c in self.cities)
        return World(self.start_date, cities, self.inter_trips, self.seed)

    def validate(self) -> list[str]:
        return validate_world(self)

    def to_dict(self) -> dict:
        return world_to_dict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def validate_world(world: World) -> list[str]:
    """Return every invariant violation found in ``world`` (empty when valid)."""
    defects: list[str] = []
    try:
        check_date(world.start_date)
    except TimeFormatError as exc:
        defects.append(str(exc))
    seen_cities: set[str] = set()
    for city in world.cities:
        if city.name in seen_cities:
            defects.append(f"duplicate city {city.name!r}")
        seen_cities.add(city.name)
        if not NAME_RE.match(city.name):
            defects.append(f"invalid city name {city.name!r}")
        names: set[str] = set()
        for p in city.places:
            where = f"{city.name}/{p.name}"
            if p.name in names:
                defects.append(f"duplicate place {where!r}")
            names.add(p.name)
            if not NAME_RE.match(p.name):
                defects.append(f"invalid place name {where!r}")
            if p.kind not in PLACE_KINDS:
                defects.append(f"unknown place kind {p.kind!r} at {where!r}")
            if p.visit_price < 0 or p.min_visit_minutes < 0:
                defects.append(f"negative price or duration at {where!r}")
            if p.is_attraction:
                if p.min_visit_minutes <= 0:
                    defects.append(f"attraction {where!r} needs min_visit_minutes > 0")
                prev_close = -1
                for open_, close in p.opening_windows:
                    if not (0 <= open_ < close <= DAY):
                        defects.append(f"bad opening window [{open_}, {close}] at {where!r}")
                    if open_ <= prev_close:
                        defects.append(f"opening windows unsorted or overlapping at {where!r}")
                    prev_close = close
            elif p.opening_windows:
                defects.append(f"opening windows on non-attraction {where!r}")
        if city.start_place not in names:
            defects.append(f"start place {city.start_place!r} missing from city {city.name!r}")
        for r in city.intra_routes:
            label = f"{city.name}: {r.origin} -> {r.destination}"
            if r.origin not in names or r.destination not in names:
                defects.append(f"dangling route endpoint in {label!r}")
            if r.origin == r.destination:
                defects.append(f"route with identical endpoints {label!r}")
            if r.duration_minutes < 1:
                defects.append(f"route duration < 1 in {label!r}")
            if r.price < 0:
                defects.append(f"negative route price in {label!r}")
    tickets: set[str] = set()
    for t in world.inter_trips:
        if t.ticket_id in tickets:
            defects.append(f"duplicate ticket_id {t.ticket_id!r}")
        tickets.add(t.ticket_id)
        if not NAME_RE.match(t.ticket_id):
            defects.append(f"invalid ticket_id {t.ticket_id!r}")
        if t.origin_city not in seen_cities or t.dest_city not in seen_cities:
            defects.append(f"ticket {t.ticket_id!r} references an unknown city")
        if t.origin_city == t.dest_city:
            defects.append(f"ticket {t.ticket_id!r} has identical endpoints")
        if t.depart >= t.arrive:
            defects.append(f"ticket {t.ticket_id!r} departs at or after arrival")
        if t.depart < 0:
            defects.append(f"ticket {t.ticket_id!r} departs before the start date")
        if t.price < 0:
            defects.append(f"ticket {t.ticket_id!r} has a negative price")
    return defects


# -- serialization ---------------------------------------------------------

_WORLD_KEYS = {"start_date", "cities", "inter_trips", "seed"}
_CITY_KEYS = {"name", "start_place", "places", "intra_routes"}
_PLACE_KEYS = {"name", "kind", "opening_windows", "min_visit_minutes", "visit_price"}
_ROUTE_KEYS = {"origin", "destination", "duration_minutes", "price"}
_TRIP_KEYS = {"ticket_id", "origin_city", "dest_city", "depart", "arrive", "price",
              "capacity_available"}


def _check_keys(obj: object, allowed: set[str], required: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise WorldError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    missing = sorted(required - set(obj))
    problems = [f"{where}: unknown field {k!r}" for k in unknown]
    problems += [f"{where}: missing field {k!r}" for k in missing]
    if problems:
        raise WorldError("malformed world", problems)
    return obj


def _int(value: object, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise WorldError(f"{where}: expected an integer, got {value!r}")
    return value


def world_from_dict(data: dict) -> World:
    """Build a World from its JSON form, rejecting unknown fields and invalid data."""
    data = _check_keys(data, _WORLD_KEYS, {"start_date", "cities", "inter_trips"}, "world")
    start_date = data["start_date"]
    if not isinstance(start_date, str):
        raise WorldError("world: start_date must be a string")
    cities = []
    for i, c in enumerate(data["cities"]):
        c = _check_keys(c, _CITY_KEYS, _CITY_KEYS, f"cities[{i}]")
        places = []
        for j, p in enumerate(c["places"]):
            where = f"cities[{i}].places[{j}]"
            p = _check_keys(p, _PLACE_KEYS, {"name", "kind"}, where)
            windows = tuple(
                (_int(w[0], where), _int(w[1], where)) for w in p.get("opening_windows", [])
            )
            places.append(Place(
                name=p["name"],
                kind=p["kind"],
                opening_windows=windows,
                min_visit_minutes=_int(p.get("min_visit_minutes", 0), where),
                visit_price=_int(p.get("visit_price", 0), where),
            ))
        routes = []
        for j, r in enumerate(c["intra_routes"]):
            where = f"cities[{i}].intra_routes[{j}]"
            r = _check_keys(r, _ROUTE_KEYS, _ROUTE_KEYS, where)
            routes.append(IntraRoute(r["origin"], r["destination"],
                                     _int(r["duration_minutes"], where), _int(r["price"], where)))
        cities.append(City(c["name"], c["start_place"], tuple(places), tuple(routes)))
    trips = []
    for i, t in enumerate(data["inter_trips"]):
        where = f"inter_trips[{i}]"
        t = _check_keys(t, _TRIP_KEYS, _TRIP_KEYS - {"capacity_available"}, where)
        try:
            depart = parse_time(t["depart"], start_date)
            arrive = parse_time(t["arrive"], start_date)
        except (TimeFormatError, TypeError) as exc:
            raise WorldError(f"{where}: {exc}") from None
        available = t.get("capacity_available", True)
        if not isinstance(available, bool):
            raise WorldError(f"{where}: capacity_available must be a boolean")
        trips.append(InterCityTrip(t["ticket_id"], t["origin_city"], t["dest_city"],
                                   depart, arrive, _int(t["price"], where), available))
    world = World(start_date, tuple(cities), tuple(trips), _int(data.get("seed", 0), "world.seed"))
    defects = validate_world(world)
    if defects:
        raise WorldError("invalid world", defects)
    return world


def world_to_dict(world: World) -> dict:
    return {
        "start_date": world.start_date,
        "seed": world.seed,
        "cities": [
            {
                "name": c.name,
                "start_place": c.start_place,
                "places": [
                    {
                        "name": p.name,
                        "kind": p.kind,
                        "opening_windows": [list(w) for w in p.opening_windows],
                        "min_visit_minutes": p.min_visit_minutes,
                        "visit_price": p.visit_price,
                    }
                    for p in c.places
                ],
                "intra_routes": [
                    {"origin": r.origin, "destination": r.destination,
                     "duration_minutes": r.duration_minutes, "price": r.price}
                    for r in c.intra_routes
                ],
            }
            for c in world.cities
        ],
        "inter_trips": [trip_to_dict(t, world.start_date) for t in world.inter_trips],
    }


def trip_to_dict(trip: InterCityTrip, start_date: str, *, with_capacity: bool = True) -> dict:
    out = {
        "ticket_id": trip.ticket_id,
        "origin_city": trip.origin_city,
        "dest_city": trip.dest_city,
        "depart": render_time(trip.depart, start_date),
        "arrive": render_time(trip.arrive, start_date),
        "price": trip.price,
    }
    if with_capacity:
        out["capacity_available"] = trip.capacity_available
    return out


def loads_world(text: str | bytes) -> World:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorldError(f"world file is not valid JSON: {exc}") from None
    return world_from_dict(data)


def load_world(path: str | Path) -> World:
    return loads_world(Path(path).read_bytes())


# -- queries ---------------------------------------------------------------

def _require_city(world: World, name: str) -> City:
    city = world.city(name)
    if city is None:
        raise UnknownEntityError(f"unknown city {name!r}")
    return city


def query_trips(world: World, origin_city: str, dest_city: str,
                window: tuple[int, int]) -> list[InterCityTrip]:
    """Trips from ``origin_city`` to ``dest_city`` departing inside ``window`` (inclusive)."""
    _require_city(world, origin_city)
    _require_city(world, dest_city)
    begin, end = window
    found = [t for t in world.inter_trips
             if t.origin_city == origin_city and t.dest_city == dest_city
             and begin <= t.depart <= end]
    return sorted(found, key=lambda t: (t.depart, t.ticket_id))


def query_attraction(world: World, city: str, place: str) -> Place:
    c = _require_city(world, city)
    p = c.place(place)
    if p is None:
        raise UnknownEntityError(f"unknown place {place!r} in {city!r}")
    if not p.is_attraction:
        raise NotAnAttractionError(f"{place!r} in {city!r} is a {p.kind}, not an attraction")
    return p
