from __future__ import annotations

import pytest
from conftest import hm, make_task

from travelsim.itinerary import GoToPlace, Itinerary, Visit
from travelsim.orchestrator import (ImpairedAgent, ProtocolViolation, SolverAgent, SubtaskResult, decompose,
                                    run_tdag, summarize_process, update_tasks)
from travelsim.orchestrator.core import Subtask
from travelsim.scenarios import GenParams, generate_suite, generate_task, generate_world
from travelsim.simulator import simulate
from travelsim.solver import Frontier
from travelsim.task import CityTarget, SpotTarget

ORDER = ("generate", "execute", "summarize", "skill_add", "update_tasks")


def _type3():
    world = generate_world(GenParams(seed=0))
    return world, generate_task(world, 3, 0)


def test_decompose_rules_without_world():
    t1 = make_task(task_type=1, cities=[CityTarget("Beta", 60)])
    t2 = make_task(spots=[SpotTarget("Alpha", "Museum", 60)])
    t3 = make_task(task_type=3, cities=[CityTarget("Beta", 60)],
                   spots=[SpotTarget("Alpha", "Museum", 60), SpotTarget("Beta", "Tower", 45)])
    assert [s.label for s in decompose(t1)] == ["inter_city_skeleton", "assemble"]
    assert [s.label for s in decompose(t2)] == ["intra_city(Alpha)", "assemble"]
    assert [s.label for s in decompose(t3)] == ["inter_city_skeleton", "intra_city(Alpha)",
                                                "intra_city(Beta)", "assemble"]


def test_decompose_follows_skeleton_order():
    world, task = _type3()
    subs = decompose(task, world)
    assert subs[0].kind == "inter_city_skeleton" and subs[-1].kind == "assemble"
    intra = [s.city for s in subs if s.kind == "intra_city"]
    assert sorted(intra) == sorted({s.city for s in task.spots})
    assert len({s.id for s in subs}) == len(subs)


def test_late_finish_shifts_downstream_frontiers():
    subs = [Subtask("s0", "intra_city", "A", Frontier("A", "A Station", 600, 0), 900),
            Subtask("s1", "intra_city", "B", Frontier("B", "B Station", 720, 500), 1200),
            Subtask("s2", "assemble", None, Frontier("A", "A Station", 480, 0), 1200)]
    realized = Frontier("A", "A Park", 750, 800)   # planned to end at 720
    update_tasks(subs, 0, SubtaskResult(Itinerary(), realized, True), world=None, task=None)
    assert subs[0].status == "done"
    assert subs[1].frontier.clock == 750 and subs[1].frontier.spent == 800
    assert subs[2].frontier.clock == 750


def test_on_time_success_is_a_fixed_point():
    subs = [Subtask("s0", "intra_city", "A", Frontier("A", "A Station", 600, 0), 900),
            Subtask("s1", "assemble", None, Frontier("A", "A Park", 720, 300), 900)]
    before = subs[1].frontier
    update_tasks(subs, 0, SubtaskResult(Itinerary(), Frontier("A", "A Park", 720, 300), True),
                 world=None, task=None)
    assert subs[1].frontier == before


def test_failure_retries_with_exclusion_until_cap():
    sub = Subtask("s0", "inter_city_skeleton", None, Frontier("A", "A Station", 480, 0), 2000)
    subs = [sub, Subtask("s1", "assemble")]
    bad = SubtaskResult(Itinerary(), Frontier("A", "A Station", 480, 0), False, "sold out", ("G1",))
    for attempt in range(1, 4):
        sub.attempts = attempt
        update_tasks(subs, 0, bad, world=None, task=None, retry_cap=3)
        assert sub.status == ("pending" if attempt < 3 else "failed")
    assert sub.excluded == frozenset({"G1"})


def test_static_mode_does_not_update():
    sub = Subtask("s0", "intra_city", "A", Frontier("A", "A Station", 480, 0), 900)
    nxt = Subtask("s1", "assemble", None, Frontier("A", "A Station", 480, 0), 900)
    update_tasks([sub, nxt], 0, SubtaskResult(Itinerary(), Frontier("A", "X", 700, 50), True),
                 world=None, task=None, static_mode=True)
    assert nxt.frontier.clock == 480 and sub.status == "done"


def test_summarize_template_and_failed_error():
    sub = Subtask("s1", "intra_city", "Alpha", Frontier("Alpha", "Alpha Station", hm(0, 9), 0), hm(0, 18))
    it = Itinerary((GoToPlace("Alpha Station", "Museum", hm(0, 9), hm(0, 9, 20)),
                    Visit("Museum", hm(0, 9, 20), hm(0, 10, 20))))
    ok = SubtaskResult(it, Frontier("Alpha", "Museum", hm(0, 10, 20), 2300), True)
    skill = summarize_process(ok, sub)
    assert skill.name == "intra_city:Alpha"
    assert "visit(Museum, 07-01 09:20, 07-01 10:20)" in skill.solution
    assert summarize_process(ok, sub) == skill
    with pytest.raises(ValueError):
        summarize_process(SubtaskResult(it, ok.realized_frontier, False), sub)


def test_event_order_matches_loop():
    world, task = _type3()
    it, log, lib = run_tdag(world, task, SolverAgent())
    names = [e["event"] for e in log.events]
    assert names[0] == "decompose" and names[-2:] == ["assemble", "submit"]
    body = [n for n in names[1:-2]]
    i = 0
    while i < len(body):
        assert body[i] == "generate" and body[i + 1] == "execute"
        j = i + 2
        if body[j] == "summarize":
            assert body[j + 1] == "skill_add"
            j += 2
        assert body[j] == "update_tasks"
        i = j + 1
    assert simulate(world, task, it).valid
    assert len(lib) >= 1


def test_static_equals_dynamic_without_faults():
    for seed in range(4):
        world = generate_world(GenParams(seed=seed))
        for task_type in (1, 2, 3):
            task = generate_task(world, task_type, seed)
            a, _, _ = run_tdag(world, task, SolverAgent(), static_mode=False)
            b, _, _ = run_tdag(world, task, SolverAgent(), static_mode=True)
            assert a == b


def test_dynamic_recovers_from_sellout_and_static_does_not():
    entry = generate_suite("f", 1, seed=3, fault="sellout_witness_ticket")[0]
    dyn, dlog, _ = run_tdag(entry.world, entry.task, SolverAgent())
    sta, slog, _ = run_tdag(entry.world, entry.task, SolverAgent(), static_mode=True)
    assert simulate(entry.world, entry.task, dyn).l1_full
    assert not simulate(entry.world, entry.task, sta).l1_full
    retries = [e for e in dlog.of("generate") if e["attempt"] > 1]
    assert retries and retries[0]["excluded"]


def test_impaired_agent_breaks_executability():
    world, task = _type3()
    it, _, _ = run_tdag(world, task, ImpairedAgent(SolverAgent()))
    assert not simulate(world, task, it).l1_full


def test_bad_agent_reply_aborts():
    class Broken:
        def solve(self, tools, ctx):
            return "not a reply"
    world, task = _type3()
    with pytest.raises(ProtocolViolation):
        run_tdag(world, task, Broken())
