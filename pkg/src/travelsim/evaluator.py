"""Three-level gated scoring and the efficiency calibration band."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

from .itinerary import Itinerary
from .simulator import Trace, simulate
from .task import OBJECTIVES, Task
from .world import World

W1, W2, W3 = 60, 20, 20


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Score:
    s1: Fraction
    s2: Fraction
    s3: Fraction

    @property
    def total(self) -> Fraction:
        return self.s1 + self.s2 + self.s3

    @property
    def binary(self) -> bool:
        return self.s1 == W1

    def to_dict(self) -> dict:
        return {
            "s1": round(float(self.s1), 2),
            "s2": round(float(self.s2), 2),
            "s3": round(float(self.s3), 2),
            "total": round(float(self.total), 2),
            "binary": self.binary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class Calibration:
    a: Fraction
    b: Fraction
    objective: str
    sample_values: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        if self.a > self.b:
            raise CalibrationError(f"calibration band inverted: a={self.a} > b={self.b}")
        if self.objective not in OBJECTIVES:
            raise CalibrationError(f"unknown objective {self.objective!r}")

    @property
    def sample_size(self) -> int:
        return len(self.sample_values)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "a": str(self.a),
            "b": str(self.b),
            "a_approx": float(self.a),
            "b_approx": float(self.b),
            "sample_size": self.sample_size,
            "sample_values": list(self.sample_values),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Calibration":
        return cls(Fraction(data["a"]), Fraction(data["b"]), data["objective"],
                   tuple(data.get("sample_values", ())))


def load_calibration(path: str | Path) -> Calibration:
    return Calibration.from_dict(json.loads(Path(path).read_text()))


def level3(s: Fraction | int, a: Fraction | int, b: Fraction | int, w3: int = W3) -> Fraction:
    s, a, b = Fraction(s), Fraction(a), Fraction(b)
    if s <= a:
        return Fraction(w3)
    if s >= b:
        return Fraction(0)
    return w3 * (1 - (s - a) / (b - a))


def score_from_counts(a1: int, b1: int, a2: int, b2: int,
                      s: Fraction | int, a: Fraction | int, b: Fraction | int) -> Score:
    """Gated score from item counts; higher levels count only when lower ones are full."""
    s1 = Fraction(W1 * a1, b1) if b1 else Fraction(0)
    l1_full = b1 > 0 and a1 == b1
    if not l1_full:
        return Score(s1, Fraction(0), Fraction(0))
    s2 = Fraction(W2 * a2, b2) if b2 else Fraction(W2)
    if b2 and a2 != b2:
        return Score(s1, s2, Fraction(0))
    return Score(s1, s2, level3(s, a, b))


def evaluate(trace: Trace, task: Task, calib: Calibration) -> Score:
    if calib.objective != task.objective:
        raise CalibrationError(f"calibration objective {calib.objective} does not match task "
                               f"objective {task.objective}")
    a1, b1 = trace.counts("L1")
    a2, b2 = trace.counts("L2")
    return score_from_counts(a1, b1, a2, b2, trace.objective_value(task.objective),
                             calib.a, calib.b)


def binary_score(score: Score) -> bool:
    return score.s1 == W1


def sqrt_fraction(value: Fraction) -> float:
    """Square root of a non-negative rational, rounded to the nearest float."""
    if value < 0:
        raise ValueError("negative variance")
    with localcontext() as ctx:
        ctx.prec = 60
        root = (Decimal(value.numerator) / Decimal(value.denominator)).sqrt()
    return float(root)


def band(values: Iterable[int]) -> tuple[Fraction, Fraction]:
    """``(mean - sd, mean + sd)`` with the population standard deviation.

    The mean is exact; the deviation is the correctly rounded float square
    root of the exact variance, taken as an exact rational.
    """
    values = list(values)
    if not values:
        raise CalibrationError("no samples")
    n = len(values)
    mu = Fraction(sum(values), n)
    var = sum((Fraction(v) - mu) ** 2 for v in values) / n
    sigma = Fraction(sqrt_fraction(var))
    return mu - sigma, mu + sigma


Sampler = Callable[[World, Task, int, int], list]


def calibrate(world: World, task: Task, sampler: Sampler | None = None, n: int = 50,
              seed: int = 0, max_rounds: int = 20) -> Calibration:
    """Derive the efficiency band from ``n`` valid itineraries.

    ``sampler(world, task, count, seed)`` returns itineraries.  Every sample is
    re-simulated; invalid ones are dropped and more are requested with a new
    seed until ``n`` valid samples exist or ``max_rounds`` is spent.
    """
    if sampler is None:
        from .solver import solver_sampler
        sampler = solver_sampler
    values: list[int] = []
    seen: set = set()
    for round_ in range(max_rounds):
        if len(values) >= n:
            break
        try:
            batch = sampler(world, task, n - len(values), seed + round_)
        except Exception:  # noqa: BLE001 - a failing sampler round just yields nothing
            batch = []
        for it in batch:
            if len(values) >= n:
                break
            key = it.actions if isinstance(it, Itinerary) else tuple(it)
            if key in seen:
                continue
            trace = simulate(world, task, it)
            if trace.valid:
                seen.add(key)
                values.append(trace.objective_value(task.objective))
    if len(values) < n:
        raise CalibrationError(f"only {len(values)} of {n} valid itineraries could be sampled")
    a, b = band(values)
    return Calibration(a, b, task.objective, tuple(values))
