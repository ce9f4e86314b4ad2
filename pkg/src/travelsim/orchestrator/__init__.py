"""Dynamic task decomposition with solver-backed or external subagents."""

from __future__ import annotations

from .agents import ImpairedAgent, SolverAgent
from .core import (AgentReply, ProtocolViolation, RunLog, Subtask, SubtaskContext, SubtaskResult,
                   assemble, decompose, execute, planned_itinerary, run_tdag, subproblem,
                   summarize_process, update_tasks)
from .skills import Skill, SkillLibrary, skill_add, skill_retrieve, tf_cosine
from .tools import TOOL_DOC, Tools, calc

__all__ = [
    "AgentReply", "ImpairedAgent", "ProtocolViolation", "RunLog", "Skill", "SkillLibrary",
    "SolverAgent", "Subtask", "SubtaskContext", "SubtaskResult", "TOOL_DOC", "Tools", "assemble",
    "calc", "decompose", "execute", "planned_itinerary", "run_tdag", "skill_add", "skill_retrieve",
    "subproblem", "summarize_process", "tf_cosine", "update_tasks",
]
