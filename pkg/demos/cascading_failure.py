"""Static versus dynamic decomposition when a booked ticket sells out."""

from __future__ import annotations

from travelsim.orchestrator import SolverAgent, run_tdag
from travelsim.reporting import classify_errors
from travelsim.scenarios import generate_suite
from travelsim.simulator import simulate

# ten tasks whose planned train is sold out; agents only find out when they try to board
suite = generate_suite("sellout", 10, seed=1, fault="sellout_witness_ticket")

totals = {"static": [0, 0], "dynamic": [0, 0]}
for entry in suite:
    for mode in ("static", "dynamic"):
        itinerary, log, _ = run_tdag(entry.world, entry.task, SolverAgent(), static_mode=mode == "static")
        trace = simulate(entry.world, entry.task, itinerary)
        totals[mode][0] += trace.l1_full
        totals[mode][1] += classify_errors(trace, log).counts["CTF"]

for mode, (executable, cascades) in totals.items():
    print(f"{mode:8s} executable {executable}/10, cascading failures {cascades}")

# one dynamic run in detail: the skeleton is retried without the sold-out ticket
entry = suite[0]
_, log, library = run_tdag(entry.world, entry.task, SolverAgent())
for event in log.events:
    if event["event"] in ("generate", "execute"):
        print(event)
print("skills learned:", [s.name for s in library.skills])
