"""Travel-planning benchmark harness: worlds, itineraries, a simulator with
three-level scoring, solvers, scenario generation and a dynamic task
decomposition loop."""

from __future__ import annotations

__version__ = "0.1.0"

from .evaluator import Calibration, Score, band, calibrate, evaluate, score_from_counts
from .itinerary import (GoToCity, GoToPlace, Itinerary, StayIn, Visit, parse_itinerary,
                        render_itinerary)
from .simulator import Trace, simulate
from .solver import PlanProblem, Solution, sample_valid, solve_exact, solve_heuristic
from .task import Constraint, Task
from .world import World, load_world

__all__ = [
    "Calibration", "Constraint", "GoToCity", "GoToPlace", "Itinerary", "PlanProblem", "Score",
    "Solution", "StayIn", "Task", "Trace", "Visit", "World", "band", "calibrate", "evaluate",
    "load_world", "parse_itinerary", "render_itinerary", "sample_valid", "score_from_counts",
    "simulate", "solve_exact", "solve_heuristic",
]
