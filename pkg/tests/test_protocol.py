from __future__ import annotations

import io
import json
import sys

import pytest

from travelsim.orchestrator import ProtocolViolation, run_tdag
from travelsim.orchestrator.protocol import (PROTOCOL_VERSION, StdioAgent, decode, encode, greedy_handler,
                                             serve_agent)
from travelsim.orchestrator.tools import ToolError, Tools, calc, published
from travelsim.scenarios import GenParams, generate_task, generate_world

AGENT = [sys.executable, "-m", "travelsim.orchestrator.protocol"]


def test_calc_is_exact():
    assert calc("1/3 + 1/6") == "1/2"
    assert calc("(30000 + 8000) * 2") == "76000"
    assert calc("7 // 2 + 7 % 2") == "4"
    assert calc("-2 ** 3") == "-8"


@pytest.mark.parametrize("expr", ["__import__('os')", "1.5 + 1", "1/0", "2 ** 100000", "x + 1", "1 +"])
def test_calc_rejects(expr):
    with pytest.raises(ToolError):
        calc(expr)


def test_tools_hide_capacity(world):
    from dataclasses import replace
    sold = world.replace_trips(replace(t, capacity_available=False) for t in world.inter_trips)
    tools = Tools(sold)
    trips = tools.call("query_trips", {"origin_city": "Alpha", "dest_city": "Beta",
                                       "begin": "07-01 00:00", "end": "07-01 23:55"})
    assert [t["ticket_id"] for t in trips] == ["G101", "K102"]
    assert all("capacity_available" not in t for t in trips)
    assert all(t.capacity_available for t in published(sold).inter_trips)
    assert tools.call("query_routes", {"city": "Alpha", "origin": "Alpha Station",
                                       "destination": "Museum"})[0]["duration_minutes"] in (10, 20)
    assert tools.call("calc", {"expr": "1+1"}) == "2"
    with pytest.raises(ToolError):
        tools.call("query_attraction", {"city": "Alpha", "place": "Alpha Station"})
    with pytest.raises(ToolError):
        tools.call("drop_tables", {})
    with pytest.raises(ToolError):
        tools.call("calc", {"nope": 1})


def test_messages_carry_version():
    line = encode({"type": "shutdown"})
    assert json.loads(line)["protocol_version"] == PROTOCOL_VERSION
    assert decode(line)["type"] == "shutdown"
    for bad in ["{", "[]", '{"type": "x"}', '{"protocol_version": 1}']:
        with pytest.raises(ProtocolViolation):
            decode(bad)


def test_serve_agent_in_memory():
    world = generate_world(GenParams(seed=1))
    task = generate_task(world, 2, 1)
    from travelsim.orchestrator.core import SubtaskContext, decompose, subproblem
    from travelsim.orchestrator.protocol import subtask_message
    sub = decompose(task, world)[0]
    ctx = SubtaskContext(sub, subproblem(task, sub), [], "doc", [])
    tools = Tools(world)
    out = io.StringIO()
    inp = io.StringIO(encode(subtask_message(ctx)) + encode({"type": "shutdown"}))

    def handler(message, call_tool):
        return [], {"name": "n", "detail": "d", "solution": "s"}

    serve_agent(handler, inp, out)
    final = decode(out.getvalue().splitlines()[0])
    assert final["type"] == "final" and final["itinerary"] == []
    assert tools.calls == 0


def test_stdio_agent_runs_tasks_end_to_end():
    from travelsim.simulator import simulate
    world = generate_world(GenParams(seed=2))
    with StdioAgent(AGENT) as agent:
        for task_type in (1, 2, 3):
            task = generate_task(world, task_type, 2)
            it, log, _ = run_tdag(world, task, agent)
            assert len(it) > 0
            assert simulate(world, task, it).counts("L1")[1] > 0
            assert log.of("submit")


def test_greedy_handler_type2_is_valid():
    from travelsim.simulator import simulate
    world = generate_world(GenParams(seed=12, attractions_per_city=1))
    task = generate_task(world, 2, 12)
    with StdioAgent(AGENT) as agent:
        it, _, _ = run_tdag(world, task, agent)
    assert simulate(world, task, it).l1_full


def test_misbehaving_agent_aborts_run():
    world = generate_world(GenParams(seed=2))
    task = generate_task(world, 2, 2)
    junk = [sys.executable, "-c", "import sys; sys.stdin.readline(); print('not json', flush=True)"]
    with StdioAgent(junk) as agent, pytest.raises(ProtocolViolation):
        run_tdag(world, task, agent)
    silent = [sys.executable, "-c", "pass"]
    with StdioAgent(silent) as agent, pytest.raises(ProtocolViolation):
        run_tdag(world, task, agent)


def test_greedy_handler_direct_call_uses_tools():
    world = generate_world(GenParams(seed=3))
    task = generate_task(world, 1, 3)
    from travelsim.orchestrator.core import SubtaskContext, decompose, subproblem
    from travelsim.orchestrator.protocol import subtask_message
    sub = decompose(task, world)[0]
    msg = json.loads(json.dumps(subtask_message(SubtaskContext(sub, subproblem(task, sub), [], "", []))))
    tools = Tools(world)
    actions, summary = greedy_handler(msg, lambda op, args: tools.call(op, args))
    assert actions and actions[0]["action"] == "go_to_city"
    assert tools.calls >= 1 and summary is None
