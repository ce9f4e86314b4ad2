"""The four itinerary actions and their text and JSON forms.

Text grammar, one action per non-blank line::

    action   := name "(" arg ("," arg)* ")"
    name     := "go_to_place" | "visit" | "go_to_city" | "stay_in"
    arg      := identifier | time
    time     := MM-DD HH:MM

Identifiers use letters, digits, underscores, hyphens and single inner spaces.
Times are parsed against a start date (see :mod:`travelsim.timeutil`).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields
from typing import Iterable, Union

from .timeutil import TimeFormatError, parse_time, render_time
from .world import NAME_RE

DEFAULT_START_DATE = "07-01"


@dataclass(frozen=True)
class GoToPlace:
    origin: str
    destination: str
    depart: int
    arrive: int

    name = "go_to_place"

    @property
    def start(self) -> int:
        return self.depart

    @property
    def end(self) -> int:
        return self.arrive


@dataclass(frozen=True)
class Visit:
    place: str
    begin: int
    end: int

    name = "visit"

    @property
    def start(self) -> int:
        return self.begin


@dataclass(frozen=True)
class GoToCity:
    origin: str
    destination: str
    depart: int
    arrive: int
    ticket: str

    name = "go_to_city"

    @property
    def start(self) -> int:
        return self.depart

    @property
    def end(self) -> int:
        return self.arrive


@dataclass(frozen=True)
class StayIn:
    city: str
    begin: int
    end: int

    name = "stay_in"

    @property
    def start(self) -> int:
        return self.begin


Action = Union[GoToPlace, Visit, GoToCity, StayIn]

# Argument names as the JSON form spells them, in positional order.
SIGNATURES: dict[str, tuple[type, tuple[str, ...]]] = {
    "go_to_place": (GoToPlace, ("origin", "destination", "depart_time", "arrive_time")),
    "visit": (Visit, ("place", "begin_time", "end_time")),
    "go_to_city": (GoToCity, ("origin", "destination", "depart_time", "arrive_time", "ticket")),
    "stay_in": (StayIn, ("city", "begin_time", "end_time")),
}


@dataclass(frozen=True)
class Itinerary:
    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, index):
        return self.actions[index]

    def __add__(self, other: "Itinerary") -> "Itinerary":
        return Itinerary(self.actions + tuple(other.actions))


class ItineraryParseError(ValueError):
    def __init__(self, diagnostics: list[tuple[int, str]]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(f"line {n}: {msg}" for n, msg in diagnostics))


_CALL_RE = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$")


def _is_time_arg(field_name: str) -> bool:
    return field_name.endswith("_time")


def _build(kind: str, values: list, start_date: str) -> Action:
    cls, arg_names = SIGNATURES[kind]
    converted = []
    for arg_name, value in zip(arg_names, values):
        if _is_time_arg(arg_name):
            converted.append(value if isinstance(value, int) else parse_time(value, start_date))
        else:
            if not isinstance(value, str) or not NAME_RE.match(value):
                raise ValueError(f"invalid identifier {value!r} for {arg_name}")
            converted.append(value)
    action = cls(*converted)
    if action.start >= action.end:
        raise ValueError(f"{kind}: start time must precede end time")
    return action


def make_action(kind: str, *args, start_date: str = DEFAULT_START_DATE) -> Action:
    """Build an action from positional arguments; times may be ints or strings."""
    if kind not in SIGNATURES:
        raise ValueError(f"unknown action {kind!r}")
    if len(args) != len(SIGNATURES[kind][1]):
        raise ValueError(f"{kind} takes {len(SIGNATURES[kind][1])} arguments")
    return _build(kind, list(args), start_date)


def parse_itinerary(text: str | bytes, start_date: str = DEFAULT_START_DATE) -> Itinerary:
    """Parse the call-syntax text form; all problems are reported together."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    actions: list[Action] = []
    diagnostics: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _CALL_RE.match(line)
        if not m:
            diagnostics.append((lineno, "expected name(arg, ...)"))
            continue
        kind, body = m.group(1), m.group(2)
        if kind not in SIGNATURES:
            diagnostics.append((lineno, f"unknown action {kind!r}"))
            continue
        args = [a.strip() for a in body.split(",")]
        expected = len(SIGNATURES[kind][1])
        if len(args) != expected:
            diagnostics.append((lineno, f"{kind} takes {expected} arguments, got {len(args)}"))
            continue
        try:
            actions.append(_build(kind, args, start_date))
        except (TimeFormatError, ValueError) as exc:
            diagnostics.append((lineno, str(exc)))
    if diagnostics:
        raise ItineraryParseError(diagnostics)
    return Itinerary(tuple(actions))


def _positional(action: Action) -> list:
    return [getattr(action, f.name) for f in fields(action)]


def render_action(action: Action, start_date: str = DEFAULT_START_DATE) -> str:
    arg_names = SIGNATURES[action.name][1]
    parts = []
    for arg_name, value in zip(arg_names, _positional(action)):
        parts.append(render_time(value, start_date) if _is_time_arg(arg_name) else value)
    return f"{action.name}({', '.join(parts)})"


def render_itinerary(it: Itinerary | Iterable[Action], start_date: str = DEFAULT_START_DATE) -> str:
    return "\n".join(render_action(a, start_date) for a in it)


# -- JSON form -------------------------------------------------------------

def action_to_json(action: Action, start_date: str = DEFAULT_START_DATE) -> dict:
    arg_names = SIGNATURES[action.name][1]
    args = {}
    for arg_name, value in zip(arg_names, _positional(action)):
        args[arg_name] = render_time(value, start_date) if _is_time_arg(arg_name) else value
    return {"action": action.name, "args": args}


def itinerary_to_json(it: Itinerary, start_date: str = DEFAULT_START_DATE) -> list[dict]:
    return [action_to_json(a, start_date) for a in it]


def itinerary_from_json(items: object, start_date: str = DEFAULT_START_DATE) -> Itinerary:
    if not isinstance(items, list):
        raise ItineraryParseError([(0, "expected a JSON array of actions")])
    actions = []
    diagnostics = []
    for i, item in enumerate(items, start=1):
        try:
            if not isinstance(item, dict) or set(item) != {"action", "args"}:
                raise ValueError('expected {"action": ..., "args": {...}}')
            kind, args = item["action"], item["args"]
            if kind not in SIGNATURES:
                raise ValueError(f"unknown action {kind!r}")
            arg_names = SIGNATURES[kind][1]
            if not isinstance(args, dict) or set(args) != set(arg_names):
                raise ValueError(f"{kind} takes arguments {', '.join(arg_names)}")
            actions.append(_build(kind, [args[n] for n in arg_names], start_date))
        except (TimeFormatError, ValueError, TypeError) as exc:
            diagnostics.append((i, str(exc)))
    if diagnostics:
        raise ItineraryParseError(diagnostics)
    return Itinerary(tuple(actions))


def load_itinerary(text: str, start_date: str = DEFAULT_START_DATE) -> Itinerary:
    """Accept either the JSON array form or the text form."""
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ItineraryParseError([(exc.lineno, f"invalid JSON: {exc.msg}")]) from None
        return itinerary_from_json(data, start_date)
    return parse_itinerary(text, start_date)
