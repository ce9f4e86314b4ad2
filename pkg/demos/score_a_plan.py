"""Build a world, pose a task, plan it and score the plan."""

from __future__ import annotations

from travelsim.evaluator import calibrate, evaluate
from travelsim.itinerary import render_itinerary
from travelsim.scenarios import GenParams, generate_task, generate_world
from travelsim.simulator import simulate
from travelsim.solver import PlanProblem, solve_exact

# three cities, three sights each, three trains per direction
world = generate_world(GenParams(seed=7))
print("cities:", ", ".join(world.city_names))

# a type 3 task mixes city stays with sightseeing
task = generate_task(world, 3, seed=7)
print(task.prose)
print()

# the exact solver works on the published timetable and the task's rules
plan = solve_exact(PlanProblem(world, task))
print(f"solver status {plan.status}, {task.objective} = {plan.objective_value}")
print(render_itinerary(plan.itinerary, task.start_date))
print()

# every action gets four executability checks; every rule gets one check
trace = simulate(world, task, plan.itinerary)
print("level 1 passed/total:", trace.counts("L1"))
print("level 2 passed/total:", trace.counts("L2"))

# the efficiency band comes from 50 distinct valid plans
calib = calibrate(world, task, n=50)
print(f"band [{float(calib.a):.1f}, {float(calib.b):.1f}] from {calib.sample_size} samples")
score = evaluate(trace, task, calib)
print(f"score {float(score.total):.2f} (s1 {float(score.s1):.2f}, s2 {float(score.s2):.2f}, "
      f"s3 {float(score.s3):.2f})")

# the witness the generator kept is valid too, and usually not optimal
witness = simulate(world, task, task.witness)
print("witness", task.objective, "=", witness.objective_value(task.objective))
