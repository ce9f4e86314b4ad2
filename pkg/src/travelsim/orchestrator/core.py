"""Dynamic task decomposition: decompose, dispatch subagents, update the subtask list.

A task is split by type.  Type 1 becomes an inter-city skeleton, Type 2 one
intra-city subtask, Type 3 a skeleton followed by one intra-city subtask per
city in skeleton order.  Every list ends with ``assemble``, which merges the
partial itineraries.  The main agent's initial plan fixes each subtask's
frontier (where and when it starts), its deadline and its share of the budget.

After each subtask the partial itinerary is executed against the real world.
In dynamic mode the subtask list is then rewritten from what actually
happened; in static mode it is left as decomposed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

from ..itinerary import GoToCity, GoToPlace, Itinerary, StayIn, Visit, itinerary_to_json, render_itinerary
from ..simulator import Trace, simulate
from ..solver import Frontier, PlanProblem, solve
from ..task import Constraint, Task
from ..timeutil import render_time
from ..world import World
from .skills import Skill, SkillLibrary
from .tools import TOOL_DOC, Tools, published

RETRY_CAP = 3
KINDS = ("inter_city_skeleton", "intra_city", "assemble")
CITY_RULES = ("spot_duration", "spot_opening_hours", "specific_hotel")
DAILY_RULES = ("activity_time", "rest_time")
SKELETON_RULES = ("transportation", "city_duration", "time_limit")


class ProtocolViolation(RuntimeError):
    """An agent broke the agent contract; the run is aborted."""


@dataclass(frozen=True)
class SubtaskResult:
    partial_itinerary: Itinerary
    realized_frontier: Frontier
    success: bool
    note: str = ""
    failed_tickets: tuple[str, ...] = ()


@dataclass
class Subtask:
    id: str
    kind: str
    city: str | None = None
    frontier: Frontier | None = None
    deadline: int = 0
    budget_cap: int | None = None
    status: str = "pending"
    result: SubtaskResult | None = None
    attempts: int = 0
    excluded: frozenset = frozenset()
    cities: tuple[str, ...] = ()   # skeleton: cities in travel order

    @property
    def label(self) -> str:
        return f"intra_city({self.city})" if self.kind == "intra_city" else self.kind

    def detail(self, start_date: str) -> str:
        """Inputs rendered as text; used for skill details and retrieval queries."""
        f = self.frontier
        parts = [self.label]
        if f is not None:
            parts.append(f"from {f.place} in {f.city} at {render_time(f.clock, start_date)}")
        parts.append(f"deadline {render_time(self.deadline, start_date)}")
        if self.budget_cap is not None:
            parts.append(f"budget {self.budget_cap}")
        if self.cities:
            parts.append("cities " + " ".join(self.cities))
        return ", ".join(parts)


@dataclass(frozen=True)
class AgentReply:
    itinerary: Itinerary
    summary: Skill | None = None
    plan: Itinerary | None = None   # the agent's whole intended plan, when it has one


@dataclass
class SubtaskContext:
    subtask: Subtask
    task: Task                # the subproblem, start = frontier
    skills: list[Skill]
    tool_doc: str
    history: list[dict]
    excluded: frozenset = frozenset()


class Agent(Protocol):
    def solve(self, tools: Tools, ctx: SubtaskContext) -> AgentReply: ...


@dataclass
class RunLog:
    task_id: str
    mode: str
    events: list[dict] = field(default_factory=list)

    def add(self, event: str, **data) -> None:
        self.events.append({"step": len(self.events), "event": event, **data})

    def of(self, event: str) -> list[dict]:
        return [e for e in self.events if e["event"] == event]

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "mode": self.mode, "events": self.events}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# -- plan analysis -------------------------------------------------------------

def planned_itinerary(world: World, task: Task, excluded: frozenset = frozenset(),
                      node_budget: int = 200_000) -> Itinerary | None:
    """The main agent's plan, made against the published timetable."""
    sol = solve(PlanProblem(published(world), task, frozenset(excluded)), node_budget)
    return sol.itinerary if sol.ok else None


def _deadline(task: Task) -> int:
    limits = [c["deadline"] for c in task.constraints_of("time_limit")]
    return min([task.horizon_end] + limits)


def _budget(task: Task) -> int | None:
    caps = [c["max_cents"] for c in task.constraints_of("budget")]
    return min(caps) if caps else None


def _price(world: World, city: str | None, action) -> int:
    if isinstance(action, GoToCity):
        trip = world.trip(action.ticket)
        return trip.price if trip else 0
    c = world.city(city) if city else None
    if c is None:
        return 0
    if isinstance(action, GoToPlace):
        for r in c.routes(action.origin, action.destination):
            if r.duration_minutes == action.arrive - action.depart:
                return r.price
        return 0
    if isinstance(action, Visit):
        p = c.place(action.place)
        return p.visit_price if p else 0
    return 0


@dataclass(frozen=True)
class _Segment:
    city: str
    frontier: Frontier
    deadline: int
    cost: int


def _segments(world: World, task: Task, plan: Itinerary, start: Frontier,
              deadline: int) -> tuple[list[_Segment], int]:
    """Intra-city runs of ``plan`` and the cost of its inter-city part."""
    city, place, clock, spent = start.city, start.place, start.clock, start.spent
    segments: list[_Segment] = []
    skeleton_cost = 0
    actions = list(plan)
    i = 0
    while i < len(actions):
        a = actions[i]
        if isinstance(a, (GoToPlace, Visit)):
            front = Frontier(city, place, clock, spent)
            cost = 0
            while i < len(actions) and isinstance(actions[i], (GoToPlace, Visit)):
                b = actions[i]
                price = _price(world, city, b)
                cost += price
                spent += price
                place = b.destination if isinstance(b, GoToPlace) else b.place
                clock = max(clock, b.end)
                i += 1
            nxt = actions[i].start if i < len(actions) else deadline
            segments.append(_Segment(city, front, nxt, cost))
            continue
        price = _price(world, city, a)
        skeleton_cost += price
        spent += price
        if isinstance(a, GoToCity):
            c = world.city(a.destination)
            city, place = a.destination, c.start_place if c else None
        clock = max(clock, a.end)
        i += 1
    return segments, skeleton_cost


def _caps(budget: int | None, costs: list[int]) -> list[int | None]:
    """Planned cost per subtask plus an even share of the unplanned budget."""
    if budget is None:
        return [None] * len(costs)
    slack = max(0, budget - sum(costs))
    share = slack // max(1, len(costs))
    caps = [c + share for c in costs]
    if caps:
        caps[-1] += slack - share * len(costs)
    return caps


def _skeleton_cities(plan: Itinerary) -> tuple[str, ...]:
    return tuple(a.destination for a in plan if isinstance(a, GoToCity))


def _intra_subtasks(task: Task, segments: list[_Segment], caps: list[int | None],
                    start_index: int) -> list[Subtask]:
    wanted = {s.city for s in task.spots} | {c["city"] for c in task.constraints_of("specific_hotel")}
    out = []
    for seg, cap in zip(segments, caps):
        if seg.city not in wanted:
            continue
        out.append(Subtask(f"s{start_index + len(out)}", "intra_city", seg.city, seg.frontier,
                           seg.deadline, cap))
    return out


def decompose(task: Task, world: World | None = None,
              planner: Callable[[World, Task], Itinerary | None] | None = None) -> list[Subtask]:
    """Rule-based split by task type; with a world, frontiers come from the main plan."""
    start = Frontier(task.start.city, task.start.place, task.start.time, 0)
    deadline = _deadline(task)
    plan = None
    if world is not None:
        plan = (planner or planned_itinerary)(world, task)
    if plan is None:
        # no plan: structure only, with frontiers left at the start
        subs: list[Subtask] = []
        if task.task_type in (1, 3):
            subs.append(Subtask("s0", "inter_city_skeleton", None, start, deadline, _budget(task),
                                cities=tuple(task.target_cities)))
        if task.task_type in (2, 3):
            # the start city's sights come first in time
            order = sorted(task.target_cities, key=lambda c: c != task.start.city)
            for c in order:
                if any(s.city == c for s in task.spots):
                    subs.append(Subtask(f"s{len(subs)}", "intra_city", c, start, deadline, None))
        subs.append(Subtask(f"s{len(subs)}", "assemble", None, start, deadline))
        return subs
    segments, skeleton_cost = _segments(world, task, plan, start, deadline)
    subs = []
    if task.task_type in (1, 3):
        costs = [skeleton_cost] + [s.cost for s in segments]
        caps = _caps(_budget(task), costs)
        subs.append(Subtask("s0", "inter_city_skeleton", None, start, deadline, caps[0],
                            cities=_skeleton_cities(plan)))
        if task.task_type == 3:
            subs += _intra_subtasks(task, segments, caps[1:], 1)
    else:
        caps = _caps(_budget(task), [s.cost for s in segments])
        subs += _intra_subtasks(task, segments, caps, 0)
    subs.append(Subtask(f"s{len(subs)}", "assemble", None, start, deadline))
    return subs


# -- subproblems and execution ---------------------------------------------------

def subproblem(task: Task, sub: Subtask) -> Task:
    """The task an agent solves for ``sub``; it starts at the subtask's frontier."""
    f = sub.frontier
    start = replace(task.start, city=f.city, place=f.place, time=f.clock)
    horizon = max(1, sub.deadline - f.clock)
    tid = f"{task.id}:{sub.id}"
    if sub.kind == "inter_city_skeleton":
        cons = [c for c in task.constraints if c.kind != "budget"]
        budget = _budget(task)
        if budget is not None:
            cons.append(Constraint.make("budget", max_cents=max(1, budget - f.spent)))
        return replace(task, id=tid, start=start, horizon_minutes=horizon, constraints=tuple(cons),
                       witness=None)
    cons = [c for c in task.constraints
            if (c.kind in CITY_RULES and c["city"] == sub.city) or c.kind in DAILY_RULES]
    if sub.budget_cap is not None:
        cons.append(Constraint.make("budget", max_cents=max(1, sub.budget_cap)))
    spots = tuple(s for s in task.spots if s.city == sub.city)
    return Task(tid, 2, task.start_date, start, horizon, task.objective, (), spots, tuple(cons),
                "", None, task.suite)


def _check_task(task: Task, sub: Subtask) -> Task:
    """What a subtask's partial itinerary is held to when it is executed."""
    if sub.kind != "inter_city_skeleton":
        return subproblem(task, sub)
    f = sub.frontier
    cons = [c for c in task.constraints if c.kind in SKELETON_RULES]
    budget = _budget(task)
    if budget is not None:
        cons.append(Constraint.make("budget", max_cents=max(1, budget - f.spent)))
    start = replace(task.start, city=f.city, place=f.place, time=f.clock)
    return replace(task, id=f"{task.id}:{sub.id}:check", start=start,
                   horizon_minutes=max(1, sub.deadline - f.clock), constraints=tuple(cons),
                   spots=(), witness=None)


def execute(world: World, task: Task, sub: Subtask, partial: Itinerary) -> tuple[SubtaskResult, Trace]:
    check = _check_task(task, sub)
    trace = simulate(world, check, partial)
    st = trace.final_state
    realized = Frontier(st.current_city, st.current_place, st.clock, sub.frontier.spent + trace.total_cost)
    success = len(partial) > 0 and trace.valid
    if not partial:
        note = "agent returned no plan"
    elif success:
        note = "ok"
    else:
        note = "; ".join(e.message for e in trace.events[:3])
    return SubtaskResult(partial, realized, success, note, tuple(trace.failed_tickets(partial))), trace


def summarize_process(result: SubtaskResult, subtask: Subtask, start_date: str = "07-01") -> Skill:
    if not result.success:
        raise ValueError("only successful subtasks are summarized")
    if subtask.kind == "intra_city":
        name = f"intra_city:{subtask.city}"
    else:
        cities = _skeleton_cities(result.partial_itinerary) or subtask.cities
        name = f"{subtask.kind}:{','.join(cities)}"
    return Skill(name, subtask.detail(start_date),
                 render_itinerary(result.partial_itinerary, start_date))


# -- dynamic updates -------------------------------------------------------------

def _reskeleton(subtasks: list[Subtask], index: int, world: World, task: Task,
                skeleton: Itinerary, plan: Itinerary | None) -> list[Subtask]:
    """Rebuild the intra-city subtasks after the skeleton changed."""
    sub = subtasks[index]
    assemble = subtasks[-1]
    if task.task_type != 3:
        return subtasks
    base = plan if plan is not None else skeleton
    segments, skeleton_cost = _segments(world, task, base, sub.frontier, sub.deadline)
    if plan is None:
        # only the skeleton is known: one segment per arrival, up to the next departure
        segments = []
        acts = list(skeleton)
        for i, a in enumerate(acts):
            if isinstance(a, GoToCity):
                nxt = acts[i + 1].start if i + 1 < len(acts) else sub.deadline
                c = world.city(a.destination)
                segments.append(_Segment(a.destination, Frontier(a.destination, c.start_place,
                                                                 a.arrive, 0), nxt, 0))
    old_caps = {s.city: s.budget_cap for s in subtasks if s.kind == "intra_city"}
    if plan is not None:
        caps = _caps(_budget(task), [skeleton_cost] + [s.cost for s in segments])[1:]
    else:
        caps = [old_caps.get(s.city) for s in segments]
    spent = sub.result.realized_frontier.spent if sub.result else 0
    segments = [replace(s, frontier=replace(s.frontier, spent=spent)) for s in segments]
    intra = _intra_subtasks(task, segments, caps, index + 1)
    head = subtasks[: index + 1]
    return head + intra + [replace(assemble, id=f"s{len(head) + len(intra)}")]


def update_tasks(subtasks: list[Subtask], index: int, result: SubtaskResult, *, world: World,
                 task: Task, static_mode: bool = False, retry_cap: int = RETRY_CAP,
                 plan: Itinerary | None = None) -> list[Subtask]:
    """Rewrite the subtask list after ``subtasks[index]`` produced ``result``."""
    sub = subtasks[index]
    sub.result = result
    if static_mode:
        sub.status = "done" if result.success else "failed"
        return subtasks
    if not result.success:
        if sub.attempts < retry_cap:
            sub.excluded = sub.excluded | frozenset(result.failed_tickets)
            sub.status = "pending"
            return subtasks
        sub.status = "failed"
    else:
        sub.status = "done"
        if sub.kind == "inter_city_skeleton":
            subtasks = _reskeleton(subtasks, index, world, task, result.partial_itinerary, plan)
    # the skeleton spans the whole trip, so only later-in-time subtasks inherit its clock;
    # spending always carries into the next one
    realized = result.realized_frontier
    first = True
    for nxt in subtasks[index + 1:]:
        if nxt.status != "pending" or nxt.frontier is None:
            continue
        f = nxt.frontier
        later = sub.kind != "inter_city_skeleton" or nxt.kind == "assemble"
        nxt.frontier = replace(f, clock=max(f.clock, realized.clock) if later else f.clock,
                               spent=realized.spent if first else f.spent)
        first = False
    return subtasks


def assemble(subtasks: list[Subtask]) -> Itinerary:
    """Merge partial itineraries in time order; ties keep subtask order."""
    actions = []
    for s in subtasks:
        if s.kind != "assemble" and s.result is not None:
            actions.extend(s.result.partial_itinerary)
    return Itinerary(tuple(sorted(actions, key=lambda a: a.start)))


def identity_doc(doc: str) -> str:
    return doc


def run_tdag(world: World, task: Task, agent: Agent, skill_library: SkillLibrary | None = None,
             static_mode: bool = False, *, retry_cap: int = RETRY_CAP,
             tool_doc_hook: Callable[[str], str] = identity_doc,
             planner: Callable[[World, Task], Itinerary | None] | None = None,
             k_retrieve: int | None = None) -> tuple[Itinerary, RunLog, SkillLibrary]:
    """Run the decompose / execute / update loop and return the merged itinerary."""
    lib = skill_library if skill_library is not None else SkillLibrary()
    log = RunLog(task.id, "static" if static_mode else "dynamic")
    tools = Tools(world)
    tool_doc = tool_doc_hook(TOOL_DOC)
    subtasks = decompose(task, tools.world, planner)
    log.add("decompose", subtasks=[{"id": s.id, "kind": s.kind, "city": s.city} for s in subtasks])
    history: list[dict] = []
    sd = task.start_date
    i = 0
    while i < len(subtasks) and subtasks[i].kind != "assemble":
        sub = subtasks[i]
        detail = sub.detail(sd)
        skills = lib.retrieve(detail, k_retrieve)
        ctx = SubtaskContext(sub, subproblem(task, sub), skills, tool_doc, list(history), sub.excluded)
        log.add("generate", subtask=sub.id, kind=sub.label, attempt=sub.attempts + 1,
                skills=[s.name for s in skills], excluded=sorted(sub.excluded))
        sub.status = "running"
        sub.attempts += 1
        reply = agent.solve(tools, ctx)
        if not isinstance(reply, AgentReply) or not isinstance(reply.itinerary, Itinerary):
            raise ProtocolViolation(f"agent returned {type(reply).__name__} for {sub.label}")
        result, trace = execute(world, task, sub, reply.itinerary)
        log.add("execute", subtask=sub.id, success=result.success, note=result.note,
                actions=len(result.partial_itinerary), failed_tickets=list(result.failed_tickets))
        history.append({"subtask": sub.label, "success": result.success,
                        "itinerary": itinerary_to_json(result.partial_itinerary, sd)})
        if result.success:
            skill = reply.summary or summarize_process(result, sub, sd)
            log.add("summarize", subtask=sub.id, skill=skill.name)
            admitted = lib.add(skill)
            log.add("skill_add", subtask=sub.id, skill=skill.name, admitted=admitted)
        subtasks = update_tasks(subtasks, i, result, world=tools.world, task=task,
                                static_mode=static_mode, retry_cap=retry_cap, plan=reply.plan)
        log.add("update_tasks", subtask=sub.id, status=sub.status, static=static_mode,
                subtasks=[s.id for s in subtasks])
        if sub.status != "pending":
            i += 1
    final = assemble(subtasks)
    log.add("assemble", subtask=subtasks[-1].id, actions=len(final))
    log.add("submit", statuses={s.id: s.status for s in subtasks if s.kind != "assemble"})
    return final, log, lib
