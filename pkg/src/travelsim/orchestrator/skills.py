"""Skill records and the redundancy-filtered skill library."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

THETA = 0.7
K_DUP = 2
K_RETRIEVE = 2

_WORD = re.compile(r"\w+")

Similarity = Callable[[str, str], float]


def tf_cosine(a: str, b: str) -> float:
    """Cosine similarity of term-frequency vectors over lowercased word tokens."""
    ta, tb = Counter(_WORD.findall(a.lower())), Counter(_WORD.findall(b.lower()))
    if not ta or not tb:
        return 0.0
    dot = sum(ta[w] * tb[w] for w in ta.keys() & tb.keys())
    norm = math.sqrt(sum(v * v for v in ta.values())) * math.sqrt(sum(v * v for v in tb.values()))
    return min(1.0, dot / norm)


class SkillError(ValueError):
    pass


@dataclass(frozen=True)
class Skill:
    name: str
    detail: str
    solution: str

    def __post_init__(self):
        for key in ("name", "detail", "solution"):
            if not str(getattr(self, key)).strip():
                raise SkillError(f"skill {key} must be non-empty")

    def to_dict(self) -> dict:
        return {"name": self.name, "detail": self.detail, "solution": self.solution}


@dataclass
class SkillLibrary:
    skills: list[Skill] = field(default_factory=list)
    similarity: Similarity = tf_cosine
    theta: float = THETA
    k_dup: int = K_DUP
    k_retrieve: int = K_RETRIEVE

    def __len__(self) -> int:
        return len(self.skills)

    def similar_count(self, candidate: Skill) -> int:
        return sum(1 for s in self.skills if self.similarity(candidate.detail, s.detail) > self.theta)

    def add(self, candidate: Skill) -> bool:
        """Admit ``candidate`` unless ``k_dup`` or more skills exceed ``theta``."""
        if not isinstance(candidate, Skill):
            raise SkillError("candidate is not a Skill")
        if self.similar_count(candidate) >= self.k_dup:
            return False
        self.skills.append(candidate)
        return True

    def retrieve(self, query: str, k: int | None = None) -> list[Skill]:
        k = self.k_retrieve if k is None else k
        if k < 0:
            raise ValueError("k must be non-negative")
        scored = [(-self.similarity(query, s.detail), i) for i, s in enumerate(self.skills)]
        scored.sort()
        return [self.skills[i] for _, i in scored[:k]]

    def to_list(self) -> list[dict]:
        return [s.to_dict() for s in self.skills]


def skill_add(lib: SkillLibrary, candidate: Skill) -> SkillLibrary:
    lib.add(candidate)
    return lib


def skill_retrieve(lib: SkillLibrary, query: str, k: int) -> list[Skill]:
    return lib.retrieve(query, k)
