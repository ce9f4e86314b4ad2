"""Line-delimited JSON protocol for agents running in another process.

Every message is one JSON object on one line and carries
``"protocol_version": 1``.  Message types:

orchestrator -> agent
    ``subtask``      subtask, frontier, task (the subproblem), skills, tool_doc, history
    ``tool_result``  ``{"id", "ok", "result" | "error"}`` answering a tool call
    ``shutdown``     the agent should exit
agent -> orchestrator
    ``tool_call``    ``{"id", "op", "args"}``; op is query_trips, query_attraction,
                     query_routes or calc
    ``final``        ``{"itinerary": [actions], "summary": {name, detail, solution} | null}``

Running ``python -m travelsim.orchestrator.protocol`` serves a small greedy
reference agent on standard input and output.
"""

from __future__ import annotations

import json
import subprocess
import sys
from typing import IO, Callable

from ..itinerary import ItineraryParseError, itinerary_from_json
from ..task import task_to_dict
from ..timeutil import parse_time, render_time
from .core import AgentReply, ProtocolViolation, SubtaskContext
from .skills import Skill, SkillError
from .tools import ToolError, Tools

PROTOCOL_VERSION = 1
MAX_TOOL_CALLS = 1000


def encode(message: dict) -> str:
    return json.dumps({"protocol_version": PROTOCOL_VERSION, **message}, sort_keys=True) + "\n"


def decode(line: str) -> dict:
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"not JSON: {exc.msg}") from None
    if not isinstance(message, dict):
        raise ProtocolViolation("message must be a JSON object")
    if message.get("protocol_version") != PROTOCOL_VERSION:
        raise ProtocolViolation(f"protocol_version must be {PROTOCOL_VERSION}")
    if not isinstance(message.get("type"), str):
        raise ProtocolViolation("message has no type")
    return message


def subtask_message(ctx: SubtaskContext) -> dict:
    sub, f = ctx.subtask, ctx.subtask.frontier
    sd = ctx.task.start_date
    task = task_to_dict(ctx.task)
    task.pop("witness", None)
    return {
        "type": "subtask",
        "subtask": {"id": sub.id, "kind": sub.kind, "city": sub.city, "label": sub.label,
                    "deadline": render_time(sub.deadline, sd), "budget_cap": sub.budget_cap,
                    "excluded": sorted(ctx.excluded)},
        "frontier": {"city": f.city, "place": f.place, "time": render_time(f.clock, sd),
                     "spent": f.spent},
        "task": task,
        "skills": [s.to_dict() for s in ctx.skills],
        "tool_doc": ctx.tool_doc,
        "history": ctx.history,
    }


class StdioAgent:
    """An agent in a child process, spoken to over its standard streams."""

    def __init__(self, command: list[str]):
        self.command = command
        self.proc: subprocess.Popen | None = None

    def _start(self) -> subprocess.Popen:
        if self.proc is None or self.proc.poll() is not None:
            self.proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         text=True, bufsize=1)
        return self.proc

    def _send(self, message: dict) -> None:
        proc = self._start()
        proc.stdin.write(encode(message))
        proc.stdin.flush()

    def _receive(self) -> dict:
        line = self._start().stdout.readline()
        if not line:
            raise ProtocolViolation("agent closed its output")
        return decode(line)

    def solve(self, tools: Tools, ctx: SubtaskContext) -> AgentReply:
        self._send(subtask_message(ctx))
        for _ in range(MAX_TOOL_CALLS + 1):
            message = self._receive()
            kind = message["type"]
            if kind == "tool_call":
                try:
                    result = tools.call(message.get("op"), message.get("args", {}))
                    self._send({"type": "tool_result", "id": message.get("id"), "ok": True,
                                "result": result})
                except ToolError as exc:
                    self._send({"type": "tool_result", "id": message.get("id"), "ok": False,
                                "error": str(exc)})
                continue
            if kind == "final":
                return _final_reply(message, ctx.task.start_date)
            raise ProtocolViolation(f"unexpected message type {kind!r}")
        raise ProtocolViolation(f"more than {MAX_TOOL_CALLS} tool calls")

    def close(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            try:
                self._send({"type": "shutdown"})
                self.proc.stdin.close()
                self.proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
        self.proc = None

    def __enter__(self) -> "StdioAgent":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _final_reply(message: dict, start_date: str) -> AgentReply:
    try:
        it = itinerary_from_json(message.get("itinerary"), start_date)
    except ItineraryParseError as exc:
        raise ProtocolViolation(f"final itinerary is malformed: {exc}") from None
    summary = message.get("summary")
    skill = None
    if summary is not None:
        try:
            skill = Skill(summary["name"], summary["detail"], summary["solution"])
        except (KeyError, TypeError, SkillError) as exc:
            raise ProtocolViolation(f"bad summary: {exc}") from None
    return AgentReply(it, skill)


# -- agent side -----------------------------------------------------------------

Handler = Callable[[dict, Callable[[str, dict], object]], tuple[list, dict | None]]


def serve_agent(handler: Handler, instream: IO[str] = sys.stdin, outstream: IO[str] = sys.stdout) -> None:
    """Run ``handler(message, call_tool) -> (itinerary_json, summary)`` per subtask."""
    counter = [0]

    def send(message: dict) -> None:
        outstream.write(encode(message))
        outstream.flush()

    def call_tool(op: str, args: dict):
        counter[0] += 1
        send({"type": "tool_call", "id": counter[0], "op": op, "args": args})
        reply = decode(instream.readline())
        if reply["type"] != "tool_result":
            raise ProtocolViolation("expected tool_result")
        if not reply.get("ok"):
            raise ToolError(reply.get("error", "tool failed"))
        return reply["result"]

    for line in instream:
        if not line.strip():
            continue
        message = decode(line)
        if message["type"] == "shutdown":
            return
        if message["type"] != "subtask":
            raise ProtocolViolation(f"unexpected message type {message['type']!r}")
        itinerary, summary = handler(message, call_tool)
        send({"type": "final", "itinerary": itinerary, "summary": summary})


def greedy_handler(message: dict, call_tool) -> tuple[list, dict | None]:
    """Reference external agent: earliest usable trips, cheapest-listed routes, no waiting."""
    task = message["task"]
    sd = task["start_date"]
    front = message["frontier"]
    city, place, clock = front["city"], front["place"], parse_time(front["time"], sd)
    deadline = render_time(parse_time(message["subtask"]["deadline"], sd), sd)
    excluded = set(message["subtask"]["excluded"])
    cons = task["constraints"]
    modes = None
    for c in cons:
        if c["kind"] == "transportation":
            modes = set(c["modes"]) if modes is None else modes & set(c["modes"])
    out: list[dict] = []

    def act(name: str, **args):
        out.append({"action": name, "args": args})

    if message["subtask"]["kind"] == "inter_city_skeleton":
        stays = {c["city"]: c["stay_minutes"] for c in task["targets"]["cities"]}
        for c in cons:
            if c["kind"] == "city_duration":
                stays[c["city"]] = max(stays.get(c["city"], 0), c["min_minutes"])
        order = [c["city"] for c in task["targets"]["cities"]]
        order += [a["city"] for a in task["targets"]["attractions"] if a["city"] not in order]
        for dest in order:
            if dest == city:
                continue
            trips = call_tool("query_trips", {"origin_city": city, "dest_city": dest,
                                              "begin": render_time(clock, sd), "end": deadline})
            usable = [t for t in trips if t["ticket_id"] not in excluded
                      and (modes is None or t["ticket_id"].rstrip("0123456789") in modes)]
            if not usable:
                break
            t = usable[0]
            act("go_to_city", origin=city, destination=dest, depart_time=t["depart"],
                arrive_time=t["arrive"], ticket=t["ticket_id"])
            city, clock = dest, parse_time(t["arrive"], sd)
            if stays.get(dest, 0) > 0:
                end = clock + stays[dest]
                act("stay_in", city=dest, begin_time=render_time(clock, sd), end_time=render_time(end, sd))
                clock = end
    else:
        for spot in task["targets"]["attractions"]:
            info = call_tool("query_attraction", {"city": city, "place": spot["place"]})
            if place != spot["place"]:
                routes = call_tool("query_routes", {"city": city, "origin": place,
                                                    "destination": spot["place"]})
                if not routes:
                    break
                r = routes[0]
                act("go_to_place", origin=place, destination=spot["place"],
                    depart_time=render_time(clock, sd),
                    arrive_time=render_time(clock + r["duration_minutes"], sd))
                clock += r["duration_minutes"]
                place = spot["place"]
            minutes = max(spot["visit_minutes"], info["min_visit_minutes"])
            act("visit", place=place, begin_time=render_time(clock, sd),
                end_time=render_time(clock + minutes, sd))
            clock += minutes
        for c in cons:
            if c["kind"] == "specific_hotel" and place != c["hotel"]:
                routes = call_tool("query_routes", {"city": city, "origin": place,
                                                    "destination": c["hotel"]})
                if routes:
                    act("go_to_place", origin=place, destination=c["hotel"],
                        depart_time=render_time(clock, sd),
                        arrive_time=render_time(clock + routes[0]["duration_minutes"], sd))
    return out, None


if __name__ == "__main__":  # pragma: no cover - exercised through a subprocess in tests
    serve_agent(greedy_handler)
