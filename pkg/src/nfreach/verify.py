"""Reach-avoid verdicts and the sampling-based tightness metric."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateMcHull, HorizonMismatch
from .forward import ReachSequence
from .sets import Box, StateSet, box_hull, check_containment, check_disjoint


class FailureKind(str, Enum):
    GOAL_MISS = "goal_miss"
    AVOID_HIT = "avoid_hit"


@dataclass(frozen=True)
class Failure:
    timestep: int
    kind: FailureKind
    member: int
    avoid_index: int | None = None


@dataclass
class Verdict:
    failures: list[Failure] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.verified


@dataclass
class ReachAvoidSpec:
    """Goal at the final step; ``avoid[t]`` lists the sets to stay out of at step t."""

    goal: StateSet
    avoid: list = field(default_factory=list)
    horizon: int = 0

    @classmethod
    def constant(cls, goal: StateSet, avoid: Sequence[StateSet], horizon: int) -> "ReachAvoidSpec":
        """Same avoid sets at every step ``0..horizon``."""
        return cls(goal, [list(avoid) for _ in range(horizon + 1)], horizon)

    def avoid_at(self, t: int) -> list:
        if t < len(self.avoid) and self.avoid[t]:
            return list(self.avoid[t])
        return []


def check_reach_avoid(reach: ReachSequence, spec: ReachAvoidSpec, exact_goal: bool = False) -> Verdict:
    """Conservative verdict: ``verified`` implies the true closed loop satisfies ``spec``.

    Goal containment uses each final member's box hull unless ``exact_goal``.
    """
    if reach.horizon != spec.horizon:
        raise HorizonMismatch(f"reach sequence has {reach.horizon} steps, spec expects {spec.horizon}")
    verdict = Verdict()
    for i, member in enumerate(reach.sets[-1]):
        inner = member if exact_goal else box_hull(member)
        if not check_containment(inner, spec.goal):
            verdict.failures.append(Failure(spec.horizon, FailureKind.GOAL_MISS, i))
    for t, union in enumerate(reach.sets):
        for j, avoid in enumerate(spec.avoid_at(t)):
            for i, member in enumerate(union):
                if not check_disjoint(member, avoid):
                    verdict.failures.append(Failure(t, FailureKind.AVOID_HIT, i, j))
    return verdict


def tightness_error(reach: ReachSequence, mc: list[Box]) -> list[float]:
    """Per step: hypervolume of the reach hull over that of the sampled hull, minus one."""
    if len(mc) != len(reach.sets):
        raise HorizonMismatch(f"{len(mc)} sampled hulls for {len(reach.sets)} reach steps")
    out = []
    for t, (union, sampled) in enumerate(zip(reach.sets, mc)):
        denom = sampled.volume()
        if denom <= 0:
            raise DegenerateMcHull(f"sampled hull at step {t} has zero volume")
        out.append(union.hull().volume() / denom - 1.0)
    return out
