"""Drive an agent living in another process over the line-JSON protocol."""

from __future__ import annotations

import sys

from travelsim.orchestrator import SkillLibrary, run_tdag
from travelsim.orchestrator.protocol import StdioAgent
from travelsim.scenarios import GenParams, generate_task, generate_world
from travelsim.simulator import simulate

world = generate_world(GenParams(seed=12, attractions_per_city=1))

# the reference agent: earliest trains, first listed routes, no waiting
command = [sys.executable, "-m", "travelsim.orchestrator.protocol"]

# one library shared across tasks, so later subtasks can retrieve earlier skills
library = SkillLibrary()
with StdioAgent(command) as agent:
    for task_type in (1, 2, 3):
        task = generate_task(world, task_type, seed=12)
        itinerary, log, library = run_tdag(world, task, agent, library)
        trace = simulate(world, task, itinerary)
        print(f"type {task_type}: L1 {trace.counts('L1')}, L2 {trace.counts('L2')}, "
              f"{len(log.of('generate'))} subtask attempts")

for skill in library.skills:
    print("-", skill.name, "|", skill.detail)
