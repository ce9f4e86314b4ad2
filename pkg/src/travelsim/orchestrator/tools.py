"""Tools a subagent may call: timetable and attraction lookups plus a calculator.

Agents see the published timetable: ticket availability is only discovered
by trying to travel, as it would be for a real booking.
"""

from __future__ import annotations

import ast
import operator
from dataclasses import replace
from fractions import Fraction

from ..timeutil import parse_time, render_time
from ..world import (NotAnAttractionError, UnknownEntityError, World, query_attraction,
                     query_trips, trip_to_dict)

TOOL_DOC = """\
query_trips(origin_city, dest_city, begin, end)
    Inter-city trips departing within [begin, end] ("MM-DD HH:MM"), sorted by
    departure.  Availability is not shown.
query_attraction(city, place)
    Opening windows (minute-of-day pairs), minimum visit minutes and price in cents.
query_routes(city, origin, destination)
    Local routes between two places with duration and price.
calc(expr)
    Exact arithmetic over integers and fractions: + - * / // % ** and parentheses.
"""


class ToolError(ValueError):
    pass


_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: lambda a, b: Fraction(a) / Fraction(b), ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod, ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def calc(expr: str) -> str:
    """Evaluate an arithmetic expression exactly; the result is an int or ``p/q`` string."""
    if len(expr) > 500:
        raise ToolError("expression too long")
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ToolError(f"cannot parse expression: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and type(node.value) is int:
            return node.value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            left, right = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Pow) and (not isinstance(right, int) or abs(right) > 64):
                raise ToolError("exponent must be an integer of at most 64")
            try:
                return _BINOPS[type(node.op)](left, right)
            except ZeroDivisionError:
                raise ToolError("division by zero") from None
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ToolError(f"unsupported syntax: {type(node).__name__}")

    value = Fraction(ev(tree))
    return str(value.numerator) if value.denominator == 1 else str(value)


def published(world: World) -> World:
    """The world as an agent sees it: every ticket looks bookable."""
    return world.replace_trips(replace(t, capacity_available=True) for t in world.inter_trips)


class Tools:
    def __init__(self, world: World):
        self.truth = world
        self.world = published(world)
        self.calls = 0

    def query_trips(self, origin_city: str, dest_city: str, begin: str, end: str) -> list[dict]:
        sd = self.world.start_date
        window = (parse_time(begin, sd), parse_time(end, sd))
        trips = query_trips(self.world, origin_city, dest_city, window)
        return [trip_to_dict(t, sd, with_capacity=False) for t in trips]

    def query_attraction(self, city: str, place: str) -> dict:
        p = query_attraction(self.world, city, place)
        return {"name": p.name, "opening_windows": [list(w) for w in p.opening_windows],
                "min_visit_minutes": p.min_visit_minutes, "visit_price": p.visit_price}

    def query_routes(self, city: str, origin: str, destination: str) -> list[dict]:
        c = self.world.city(city)
        if c is None:
            raise UnknownEntityError(city)
        return [{"duration_minutes": r.duration_minutes, "price": r.price}
                for r in c.routes(origin, destination)]

    def call(self, op: str, args: dict):
        self.calls += 1
        handlers = {"query_trips": self.query_trips, "query_attraction": self.query_attraction,
                    "query_routes": self.query_routes, "calc": calc}
        if op not in handlers:
            raise ToolError(f"unknown tool {op!r}")
        if not isinstance(args, dict):
            raise ToolError("tool args must be an object")
        try:
            return handlers[op](**args)
        except TypeError as exc:
            raise ToolError(f"bad arguments for {op}: {exc}") from None
        except (UnknownEntityError, NotAnAttractionError, ValueError) as exc:
            raise ToolError(str(exc)) from None

    def render_time(self, minutes: int) -> str:
        return render_time(minutes, self.world.start_date)
