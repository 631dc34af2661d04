"""Initial-set partitioners wrapped around the single-cell propagator."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import partial

import numpy as np

from .dynamics import simulate_rollouts
from .forward import ReachSequence, ReachSpec, propagate, propagate_cells
from .nn import FeedforwardNetwork
from .sets import Box, SetUnion, box_hull

CONTAIN_TOL = 1e-9


class Strategy(str, Enum):
    NONE = "none"
    UNIFORM = "uniform"
    GREEDY = "greedy"


@dataclass(frozen=True)
class PartitionConfig:
    strategy: Strategy = Strategy.NONE
    cells: tuple = ()
    budget: int = 1
    mc_samples: int = 1000
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "cells", tuple(int(r) for r in self.cells))
        if any(r < 1 for r in self.cells):
            raise ValueError("cell counts must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be >= 2")


def uniform_partition(box: Box, r) -> list[Box]:
    r = np.broadcast_to(np.asarray(r, dtype=int), (box.dim,))
    if np.any(r < 1):
        raise ValueError("cell counts must be >= 1")
    edges = [np.linspace(box.lo[k], box.hi[k], r[k] + 1) for k in range(box.dim)]
    # pin outer edges so the cells tile the box exactly
    for k, e in enumerate(edges):
        e[0], e[-1] = box.lo[k], box.hi[k]
    cells = []
    for idx in itertools.product(*(range(n) for n in r)):
        lo = [edges[k][i] for k, i in enumerate(idx)]
        hi = [edges[k][i + 1] for k, i in enumerate(idx)]
        cells.append(Box(lo, hi))
    return cells


def bisect(box: Box) -> tuple[Box, Box]:
    """Split along the longest edge at its midpoint."""
    k = int(np.argmax(box.hi - box.lo))
    mid = (box.lo[k] + box.hi[k]) / 2
    hi1 = box.hi.copy()
    hi1[k] = mid
    lo2 = box.lo.copy()
    lo2[k] = mid
    return Box(box.lo, hi1), Box(lo2, box.hi)


def _merge(x0, results: list[ReachSequence], calls: int) -> ReachSequence:
    horizon = results[0].horizon
    sets = [SetUnion([x0])]
    for t in range(1, horizon + 1):
        sets.append(SetUnion([m for r in results for m in r.sets[t]]))
    warnings = []
    for r in results:
        warnings.extend(w for w in r.warnings if w not in warnings)
    return ReachSequence(sets, warnings, [], calls)


def propagate_uniform(systems, net: FeedforwardNetwork, x0: Box, horizon: int, spec: ReachSpec | None = None,
                      config: PartitionConfig | None = None) -> ReachSequence:
    config = config or PartitionConfig(Strategy.UNIFORM, (1,) * x0.dim)
    cells = uniform_partition(x0, config.cells or (1,) * x0.dim)
    run = partial(propagate_cells, systems, net, horizon=horizon, spec=spec)
    if config.jobs > 1 and len(cells) > 1:
        chunks = [cells[i::config.jobs] for i in range(config.jobs) if cells[i::config.jobs]]
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            parts = list(pool.map(run, chunks))
        # restore the row-major cell order
        results = [None] * len(cells)
        for i, part in enumerate(parts):
            results[i::config.jobs] = part
    else:
        results = run(cells)
    if len(results) == 1:
        return results[0]
    return _merge(x0, results, len(cells))


def mc_reach_estimate(systems, net: FeedforwardNetwork, x0: Box, horizon: int, n_samples: int = 1000,
                      seed: int = 0) -> list[Box]:
    """Box hulls of noise-free rollouts from uniform samples of ``x0``, per timestep."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    x0 = box_hull(x0)
    traj = simulate_rollouts(systems, net, x0.sample(n_samples, rng), horizon, rng, noise=False)
    return [Box(states.min(axis=0), states.max(axis=0)) for states in traj]


def _overshoot(reach_box: Box, mc_box: Box) -> float:
    over_hi = np.max(np.maximum(reach_box.hi - mc_box.hi, 0.0))
    over_lo = np.max(np.maximum(mc_box.lo - reach_box.lo, 0.0))
    return float(over_hi + over_lo)


def _inside_mc(seq: ReachSequence, mc: list[Box]) -> bool:
    for t in range(1, seq.horizon + 1):
        h = seq.sets[t].hull()
        if np.any(h.lo < mc[t].lo - CONTAIN_TOL) or np.any(h.hi > mc[t].hi + CONTAIN_TOL):
            return False
    return True


def propagate_greedy_sim_guided(systems, net: FeedforwardNetwork, x0: Box, horizon: int,
                                spec: ReachSpec | None = None,
                                config: PartitionConfig | None = None) -> ReachSequence:
    """Greedy refinement: repeatedly bisect the cell whose final reach set overshoots the
    simulated hull the most, until the call budget runs out or every cell is retired."""
    config = config or PartitionConfig(Strategy.GREEDY)
    mc = mc_reach_estimate(systems, net, x0, horizon, config.mc_samples, config.seed)
    full = propagate(systems, net, x0, horizon, spec)
    calls = 1
    stack: list[tuple[Box, ReachSequence]] = [(x0, full)]
    retired: list[tuple[Box, ReachSequence]] = []
    while calls < config.budget and stack:
        scores = [_overshoot(seq.sets[-1].hull(), mc[-1]) for _, seq in stack]
        cell, seq = stack.pop(int(np.argmax(scores)))
        if _inside_mc(seq, mc):
            retired.append((cell, seq))
            continue
        halves = bisect(cell)
        stack.extend(zip(halves, propagate_cells(systems, net, list(halves), horizon, spec)))
        calls += 2

    elements = retired + stack
    if len(elements) == 1 and calls == 1:
        full.cells = [x0]
        return full
    out = _merge(x0, [seq for _, seq in elements], calls)
    out.cells = [c for c, _ in elements]
    return out
