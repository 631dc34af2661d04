"""Inner approximations of backprojection sets.

A backprojection set holds the states the *given* policy drives into a target
set.  Each backward step bounds the backreachable set with LPs, partitions that
box, relaxes the network over each cell and keeps the polytope of cell states
for which every control allowed by the relaxation lands in the target box.

Assumes perfect observations (``C = I``) and no noise.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .dynamics import LtvSystem, control, step, system_at
from .errors import EmptyUnion, MissingControlLimits
from .forward import selector
from .nn import AffineEnvelope, FeedforwardNetwork, SlopePolicy, crown_envelopes, with_limits
from .partition import uniform_partition
from .sets import Box, HPolytope, SetUnion, as_polytope, box_hull, is_empty, lp, sample_polytope

log = logging.getLogger(__name__)

HULL_CHAIN_NOTE = (
    "multi-step backward recursion uses the box hull of each backprojection union "
    "as the next target"
)


@dataclass
class BackprojectionResult:
    """``sets[k]`` under-approximates the k-step backprojection; ``sets[0]`` is the target."""

    sets: list[SetUnion]
    backreachable: list[Box | None]
    warnings: list[str] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.sets) - 1


def _check_assumptions(sys: LtvSystem):
    if sys.C.shape != (sys.n_x, sys.n_x) or not np.array_equal(sys.C, np.eye(sys.n_x)):
        raise ValueError("backward analysis assumes perfect observations (C = I)")
    if sys.has_noise:
        raise ValueError("backward analysis assumes zero noise")


def backreachable_box(sys: LtvSystem, next_set, u_set: Box) -> Box:
    """Box bound on states from which some admissible control reaches ``next_set``."""
    P = as_polytope(next_set)
    n_x, n_u = sys.n_x, sys.n_u
    U = as_polytope(u_set)
    # variables are (x, u)
    A = np.vstack([
        np.hstack([P.A @ sys.A, P.A @ sys.B]),
        np.hstack([np.zeros((U.A.shape[0], n_x)), U.A]),
    ])
    b = np.concatenate([P.b - P.A @ sys.c, U.b])
    eye = np.eye(n_x + n_u)
    hi = np.array([lp.lp_solve(eye[k], A, b).value for k in range(n_x)])
    lo = np.array([-lp.lp_solve(-eye[k], A, b).value for k in range(n_x)])
    return Box(np.minimum(lo, hi), hi)


def backprojection_polytope(sys: LtvSystem, env: AffineEnvelope, next_box: Box, cell: Box) -> HPolytope:
    """States in ``cell`` mapped into ``next_box`` under every control the envelope allows."""
    B = sys.B
    Z_lo = np.empty((sys.n_x, sys.n_x))  # rows B_k s(B_k, Phi, Psi)
    Z_hi = np.empty((sys.n_x, sys.n_x))
    z_lo = np.empty(sys.n_x)
    z_hi = np.empty(sys.n_x)
    for k in range(sys.n_x):
        Bk = B[k]
        Z_lo[k] = Bk @ selector(Bk, env.Phi, env.Psi)
        Z_hi[k] = Bk @ selector(Bk, env.Psi, env.Phi)
        z_lo[k] = Bk @ selector(Bk, env.beta, env.alpha)
        z_hi[k] = Bk @ selector(Bk, env.alpha, env.beta)
    P = np.vstack([sys.A + Z_hi, -(sys.A + Z_lo)])
    p = np.concatenate([next_box.hi - (z_hi + sys.c), -next_box.lo + z_lo + sys.c])
    return HPolytope(P, p).intersect(cell)


def _cell_polytopes(sys, net, next_box, cells):
    envs = crown_envelopes(net, cells, SlopePolicy.for_network(net))
    polys = [backprojection_polytope(sys, envs[i], next_box, c) for i, c in enumerate(cells)]
    return [None if is_empty(p) else p for p in polys]


def estimate_backprojection(systems, net: FeedforwardNetwork, target: Box, horizon: int, r, jobs: int = 1) -> BackprojectionResult:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    target = box_hull(target)
    result = BackprojectionResult([SetUnion([target])], [None])
    if horizon > 1:
        result.warnings.append(HULL_CHAIN_NOTE)
    for k in range(1, horizon + 1):
        sys = system_at(systems, horizon - k)
        _check_assumptions(sys)
        if sys.u_limits is None:
            raise MissingControlLimits("backreachable set is unbounded without control limits")
        prev = result.sets[-1]
        if not prev.members:
            result.sets.append(SetUnion())
            result.backreachable.append(None)
            continue
        next_box = prev.hull()
        policy_net = with_limits(net, sys.u_limits)
        breach = backreachable_box(sys, next_box, sys.u_box)
        cells = uniform_partition(breach, r)
        work = partial(_cell_polytopes, sys, policy_net, next_box)
        if jobs > 1 and len(cells) > 1:
            chunks = [cells[i::jobs] for i in range(jobs) if cells[i::jobs]]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                parts = list(pool.map(work, chunks))
            polys = [None] * len(cells)
            for i, part in enumerate(parts):
                polys[i::jobs] = part
        else:
            polys = work(cells)
        result.sets.append(SetUnion([p for p in polys if p is not None]))
        result.backreachable.append(breach)
    return result


def _member_samples(result: BackprojectionResult, k: int, samples: int, rng, warnings: list):
    union = result.sets[k]
    if not union.members:
        raise EmptyUnion(f"backprojection at step {k} is empty")
    per = int(np.ceil(samples / len(union.members)))
    pts = []
    for i, poly in enumerate(union):
        got = sample_polytope(poly, per, rng, max_tries=100 * per)
        if len(got) == 0:
            msg = f"member {i} too thin to sample; skipped"
            log.warning(msg)
            warnings.append(msg)
        pts.append(got)
    return np.concatenate(pts)[:samples] if pts else np.empty((0, union.members[0].dim))


def backprojection_coverage(result: BackprojectionResult, systems, net: FeedforwardNetwork, target: Box,
                            samples: int = 1000, seed: int = 0, k: int = 1) -> float:
    """Fraction of points sampled from ``sets[k]`` that one true closed-loop step
    carries into ``target`` (use the step-``k-1`` hull for ``k > 1``)."""
    rng = np.random.default_rng(seed)
    sys = system_at(systems, result.horizon - k)
    pts = _member_samples(result, k, samples, rng, result.warnings)
    if len(pts) == 0:
        raise EmptyUnion("no member could be sampled")
    nxt = step(sys, pts, control(sys, net, pts))
    return float(np.mean(box_hull(target).contains(nxt, tol=1e-9)))


def image_coverage(result: BackprojectionResult, systems, net: FeedforwardNetwork, target: Box,
                   samples: int = 200_000, bins: int = 20, seed: int = 0) -> float:
    """Share of a ``bins``-per-axis grid over ``target`` hit by one-step images of
    uniform samples of the backreachable box that fall inside the union."""
    breach = result.backreachable[1]
    union = result.sets[1]
    if breach is None or not union.members:
        return 0.0
    sys = system_at(systems, result.horizon - 1)
    rng = np.random.default_rng(seed)
    pts = breach.sample(samples, rng)
    pts = pts[union.contains(pts, tol=0.0)]
    if len(pts) == 0:
        return 0.0
    nxt = step(sys, pts, control(sys, net, pts))
    target = box_hull(target)
    rel = (nxt - target.lo) / np.where(target.hi > target.lo, target.hi - target.lo, 1.0)
    idx = np.clip((rel * bins).astype(int), 0, bins - 1)
    idx = idx[target.contains(nxt)]
    flat = np.ravel_multi_index(idx.T, (bins,) * target.dim)
    return len(np.unique(flat)) / bins ** target.dim
