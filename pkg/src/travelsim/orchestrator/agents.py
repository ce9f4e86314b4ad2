"""Built-in subagents backed by the solver."""

from __future__ import annotations

from dataclasses import dataclass

from ..itinerary import GoToCity, GoToPlace, Itinerary, StayIn
from ..solver import PlanProblem, solve
from .core import AgentReply, SubtaskContext
from .tools import Tools


@dataclass
class SolverAgent:
    """Plans its subtask with the solver against the published timetable.

    The skeleton agent plans the whole remaining trip and hands back only the
    inter-city part; the full plan travels along so the main agent can size
    the downstream subtasks.
    """

    node_budget: int = 200_000
    time_budget_ms: int = 2000
    seed: int = 0

    def solve(self, tools: Tools, ctx: SubtaskContext) -> AgentReply:
        problem = PlanProblem(tools.world, ctx.task, frozenset(ctx.excluded))
        sol = solve(problem, self.node_budget, self.time_budget_ms, self.seed)
        if not sol.ok:
            return AgentReply(Itinerary())
        plan = sol.itinerary
        if ctx.subtask.kind == "inter_city_skeleton":
            skeleton = Itinerary(tuple(a for a in plan if isinstance(a, (GoToCity, StayIn))))
            return AgentReply(skeleton, plan=plan)
        return AgentReply(plan, plan=plan)


@dataclass
class ImpairedAgent:
    """Wraps an agent and drops the last move that something later depends on.

    Everything after the dropped move then starts from the wrong place, so
    the partial plan loses some executability items but keeps most of them.
    """

    inner: object

    def solve(self, tools: Tools, ctx: SubtaskContext) -> AgentReply:
        reply = self.inner.solve(tools, ctx)
        actions = list(reply.itinerary)
        for i in range(len(actions) - 2, -1, -1):
            if isinstance(actions[i], (GoToCity, GoToPlace)):
                del actions[i]
                break
        return AgentReply(Itinerary(tuple(actions)), reply.summary, None)
