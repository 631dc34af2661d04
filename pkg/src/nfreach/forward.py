"""Forward reachable-set outer approximations for neural feedback loops.

One step works as follows.  The network is relaxed over every observation the
current set can produce; for each output facet the relaxed controller that
pushes that facet furthest is selected by the sign of ``a_i . B``; that gives
an affine bound of the facet value in the current state, which is then
maximised over the current set either in closed form (lp-ball) or with an LP
(polytope).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import LtvSystem, system_at
from .errors import DegenerateBounds, ShapeMismatch
from .nn import AffineEnvelope, EnvelopeBatch, FeedforwardNetwork, SlopePolicy, crown_envelopes, with_limits
from .sets import Box, HPolytope, LpBall, SetUnion, StateSet, as_polytope, lp_solve, support_value

log = logging.getLogger(__name__)


class Solver(str, Enum):
    CLOSED_FORM = "closed_form"
    LP = "lp"


@dataclass(frozen=True)
class ClosedLoopEnvelope:
    Upsilon: np.ndarray  # (m_out, n_u, n_y)
    Xi: np.ndarray
    Gamma: np.ndarray  # (n_u, m_out)
    Delta: np.ndarray


@dataclass(frozen=True)
class FacetAffine:
    """``M_L x + n_L <= a_i . f(x) <= M_U x + n_U`` row-wise."""

    M_U: np.ndarray
    M_L: np.ndarray
    n_U: np.ndarray
    n_L: np.ndarray


@dataclass(frozen=True)
class ReachSpec:
    """Output facets (``None`` for the identity, giving boxes) and solver."""

    facets: np.ndarray | None = None
    solver: Solver = Solver.CLOSED_FORM
    bounds: str = "crown"

    def __post_init__(self):
        object.__setattr__(self, "solver", Solver(self.solver))
        if self.facets is not None:
            object.__setattr__(self, "facets", np.atleast_2d(np.asarray(self.facets, dtype=float)))

    @property
    def output_shape(self) -> str:
        return "box" if self.facets is None else "polytope"

    def facet_matrix(self, n_x: int) -> np.ndarray:
        return np.eye(n_x) if self.facets is None else self.facets


@dataclass
class ReachSequence:
    """Per-timestep unions; entry 0 is the initial set."""

    sets: list[SetUnion]
    warnings: list[str] = field(default_factory=list)
    envelopes: list[AffineEnvelope] = field(default_factory=list)
    calls: int = 1
    cells: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.sets) - 1

    def __getitem__(self, t: int) -> SetUnion:
        return self.sets[t]

    def hulls(self) -> list[Box]:
        return [u.hull() for u in self.sets]


def evenly_spaced_facets(n_facets: int, n_x: int = 2, dims: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Unit normals at ``360 / n_facets`` degree spacing in the plane ``dims``."""
    theta = 2 * np.pi * np.arange(n_facets) / n_facets
    F = np.zeros((n_facets, n_x))
    F[:, dims[0]] = np.cos(theta)
    F[:, dims[1]] = np.sin(theta)
    F[np.abs(F) < 1e-15] = 0.0
    return F


def selector(z, A, B) -> np.ndarray:
    """Row ``a`` of ``A`` where ``z[a] >= 0``, else row ``a`` of ``B``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ShapeMismatch(f"selector arguments differ in shape: {A.shape} vs {B.shape}")
    if A.shape[0] != z.size:
        raise ShapeMismatch(f"selector sign vector has {z.size} entries for {A.shape[0]} rows")
    mask = (z >= 0).reshape((-1,) + (1,) * (A.ndim - 1))
    return np.where(mask, A, B)


def possible_observations(sys: LtvSystem, s: StateSet) -> Box:
    """Box of every ``C^T x + v`` with ``x`` in ``s`` and ``v`` in the noise support."""
    if isinstance(s, Box):
        mid = s.center @ sys.C
        rad = s.radius @ np.abs(sys.C)
        lo, hi = mid - rad, mid + rad
    else:
        cols = sys.C.T
        hi = np.array([support_value(c, s) for c in cols])
        lo = np.array([-support_value(-c, s) for c in cols])
    return Box(np.minimum(lo, hi) + sys.nu_lo, hi + sys.nu_hi)


def closed_loop_envelope(env: AffineEnvelope | EnvelopeBatch, sys: LtvSystem, facets) -> ClosedLoopEnvelope:
    """Per-facet worst-case controller bounds; batched envelopes give a leading batch axis."""
    facets = np.atleast_2d(facets)
    pos = (facets @ sys.B) >= 0  # sign of each control's effect on each facet
    Psi, Phi = env.Psi[..., None, :, :], env.Phi[..., None, :, :]
    Upsilon = np.where(pos[:, :, None], Psi, Phi)
    Xi = np.where(pos[:, :, None], Phi, Psi)
    alpha, beta = env.alpha[..., None, :], env.beta[..., None, :]
    Gamma = np.swapaxes(np.where(pos, alpha, beta), -1, -2)
    Delta = np.swapaxes(np.where(pos, beta, alpha), -1, -2)
    return ClosedLoopEnvelope(Upsilon, Xi, Gamma, Delta)


def facet_affine(clenv: ClosedLoopEnvelope, sys: LtvSystem, facets) -> FacetAffine:
    F = np.atleast_2d(facets)
    FB = F @ sys.B  # (m, n_u)
    wU = np.einsum("iu,...iuy->...iy", FB, clenv.Upsilon)  # facet sensitivity to each observation
    wL = np.einsum("iu,...iuy->...iy", FB, clenv.Xi)
    FA = F @ sys.A
    M_U = FA + wU @ sys.C.T
    M_L = FA + wL @ sys.C.T

    nu_U = np.where(wU >= 0, sys.nu_hi, sys.nu_lo)
    nu_L = np.where(wL >= 0, sys.nu_lo, sys.nu_hi)
    om_U = np.sum(F * np.where(F >= 0, sys.omega_hi, sys.omega_lo), axis=1)
    om_L = np.sum(F * np.where(F >= 0, sys.omega_lo, sys.omega_hi), axis=1)
    Fc = F @ sys.c
    ctrl_U = np.sum(FB * np.swapaxes(clenv.Gamma, -1, -2), axis=-1)
    ctrl_L = np.sum(FB * np.swapaxes(clenv.Delta, -1, -2), axis=-1)
    n_U = np.sum(wU * nu_U, axis=-1) + ctrl_U + Fc + om_U
    n_L = np.sum(wL * nu_L, axis=-1) + ctrl_L + Fc + om_L
    return FacetAffine(M_U, M_L, n_U, n_L)


def _take(fa: FacetAffine, i: int) -> FacetAffine:
    return FacetAffine(fa.M_U[i], fa.M_L[i], fa.n_U[i], fa.n_L[i])


def facet_bounds(fa: FacetAffine, s: StateSet, solver: Solver = Solver.CLOSED_FORM):
    """Upper/lower facet values ``(gamma_U, gamma_L)`` over the input set."""
    solver = Solver(solver)
    if solver is Solver.CLOSED_FORM:
        ball = s.to_ball() if isinstance(s, Box) else s
        if not isinstance(ball, LpBall):
            raise TypeError("closed-form facet bounds need an lp-ball or box input")
        q = ball.dual_order
        gU = np.linalg.norm(fa.M_U * ball.radius, ord=q, axis=1) + fa.M_U @ ball.center + fa.n_U
        gL = -np.linalg.norm(fa.M_L * ball.radius, ord=q, axis=1) + fa.M_L @ ball.center + fa.n_L
        return gU, gL
    P = as_polytope(s)
    gU = np.array([lp_solve(row, P).value for row in fa.M_U]) + fa.n_U
    gL = np.array([-lp_solve(-row, P).value for row in fa.M_L]) + fa.n_L
    return gU, gL


def _box_facet_bounds(fa: FacetAffine, boxes: list[Box]):
    # closed form over many boxes at once (l-inf ball, dual norm l1)
    center = np.array([b.center for b in boxes])[:, None, :]
    radius = np.array([b.radius for b in boxes])[:, None, :]
    gU = np.sum(np.abs(fa.M_U) * radius + fa.M_U * center, axis=-1) + fa.n_U
    gL = np.sum(fa.M_L * center - np.abs(fa.M_L) * radius, axis=-1) + fa.n_L
    return gU, gL


def to_reach_set(gamma_U, gamma_L, facets=None) -> Box | HPolytope:
    gU = np.asarray(gamma_U, dtype=float)
    gL = np.asarray(gamma_L, dtype=float)
    slack = 1e-9 * np.maximum(1.0, np.maximum(np.abs(gU), np.abs(gL)))
    if np.any(gL > gU + slack):
        raise DegenerateBounds(f"lower facet bound exceeds upper bound at rows {np.flatnonzero(gL > gU + slack).tolist()}")
    gL = np.minimum(gL, gU)
    if facets is None:
        return Box(gL, gU)
    F = np.atleast_2d(facets)
    return HPolytope(np.vstack([F, -F]), np.concatenate([gU, -gL]))


def _resolve_solver(solver: Solver, current, warnings) -> Solver:
    if solver is Solver.CLOSED_FORM and isinstance(current, HPolytope):
        _warn(warnings, "closed-form solver needs an lp-ball input; using LP for a polytope step")
        return Solver.LP
    if solver is Solver.LP and isinstance(current, LpBall) and not np.isinf(current.norm_order):
        _warn(warnings, f"no LP form for an l{current.norm_order:g}-ball input; using closed form")
        return Solver.CLOSED_FORM
    return solver


def step_cells(sys: LtvSystem, net: FeedforwardNetwork, cells: list, spec: ReachSpec, warnings: list | None = None):
    """One-step outer bounds for several input sets at once; returns ``(sets, envelopes)``.

    The network relaxation is batched across cells for both solvers; closed-form
    facet bounds over boxes are vectorised as well, LP bounds are solved per cell.
    """
    obs = [possible_observations(sys, c) for c in cells]
    envs = crown_envelopes(net, obs, SlopePolicy.for_network(net), bounds=spec.bounds)
    F = spec.facet_matrix(sys.n_x)
    fa = facet_affine(closed_loop_envelope(envs, sys, F), sys, F)

    solvers = [_resolve_solver(spec.solver, c, warnings) for c in cells]
    if all(s is Solver.CLOSED_FORM and isinstance(c, Box) for s, c in zip(solvers, cells)):
        gU, gL = _box_facet_bounds(fa, cells)
        out = [to_reach_set(gU[i], gL[i], spec.facets) for i in range(len(cells))]
    else:
        out = []
        for i, (c, s) in enumerate(zip(cells, solvers)):
            out.append(to_reach_set(*facet_bounds(_take(fa, i), c, s), spec.facets))
    return out, envs


def one_step(sys: LtvSystem, net: FeedforwardNetwork, current: StateSet, spec: ReachSpec, warnings: list | None = None):
    """Next-state outer bound from ``current``; returns ``(set, envelope)``."""
    sets, envs = step_cells(sys, net, [current], spec, warnings)
    return sets[0], envs[0]


def _warn(sink, msg):
    log.warning(msg)
    if sink is not None and msg not in sink:
        sink.append(msg)


def _policy_nets(systems, net, horizon):
    cache = {}
    nets = []
    for t in range(horizon):
        lim = system_at(systems, t).u_limits
        key = None if lim is None else (tuple(lim[0]), tuple(lim[1]))
        if key not in cache:
            cache[key] = with_limits(net, lim)
        nets.append(cache[key])
    return nets


def propagate_cells(systems, net: FeedforwardNetwork, cells: list, horizon: int,
                    spec: ReachSpec | None = None) -> list[ReachSequence]:
    """Independent :func:`propagate` runs from each cell, batched step by step."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    spec = ReachSpec() if spec is None else spec
    seqs = [ReachSequence([SetUnion([c])]) for c in cells]
    current = list(cells)
    for t, policy_net in enumerate(_policy_nets(systems, net, horizon)):
        warnings: list[str] = []
        current, envs = step_cells(system_at(systems, t), policy_net, current, spec, warnings)
        for i, seq in enumerate(seqs):
            seq.sets.append(SetUnion([current[i]]))
            seq.envelopes.append(envs[i])
            for w in warnings:
                if w not in seq.warnings:
                    seq.warnings.append(w)
    return seqs


def propagate(systems, net: FeedforwardNetwork, x0: StateSet, horizon: int, spec: ReachSpec | None = None) -> ReachSequence:
    """Recursive multi-step outer approximation of the forward reachable sets.

    If the plant carries control limits and ``net`` does not already clip to
    them, the network is augmented first.
    """
    return propagate_cells(systems, net, [x0], horizon, spec)[0]
