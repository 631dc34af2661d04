"""Set representations and geometric queries.

Three primitive shapes are used throughout: axis-aligned boxes, vector-radius
lp-balls and H-polytopes.  A :class:`SetUnion` collects members of any of them.
Queries that need optimisation go through :func:`nfreach.lp.lp_solve`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from . import lp
from .errors import DimensionMismatch, EmptyDomain, InfeasibleError

LP_TOL = 1e-8


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float)).ravel()


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lo), _vec(self.hi)
        if lo.shape != hi.shape:
            raise DimensionMismatch(f"box lo has dim {lo.size}, hi has dim {hi.size}")
        if np.any(lo > hi):
            raise EmptyDomain(f"box lo > hi at indices {np.flatnonzero(lo > hi).tolist()}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    @property
    def radius(self) -> np.ndarray:
        return (self.hi - self.lo) / 2

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def to_ball(self) -> "LpBall":
        return LpBall(self.center, self.radius, np.inf)

    def to_polytope(self) -> "HPolytope":
        eye = np.eye(self.dim)
        return HPolytope(np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo]))

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True, eq=False)
class LpBall:
    """``{x : ||(x - center) / radius||_p <= 1}`` with per-dimension radius."""

    center: np.ndarray
    radius: np.ndarray
    norm_order: float = np.inf

    def __post_init__(self):
        center, radius = _vec(self.center), _vec(self.radius)
        if center.shape != radius.shape:
            raise DimensionMismatch("center and radius must have equal dimension")
        if np.any(radius < 0):
            raise EmptyDomain("ball radius must be non-negative")
        p = float(self.norm_order)
        if not p >= 1:
            raise ValueError(f"norm order must lie in [1, inf], got {p}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "norm_order", p)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def dual_order(self) -> float:
        p = self.norm_order
        if p == 1:
            return np.inf
        if np.isinf(p):
            return 1.0
        return p / (p - 1)

    def to_box(self) -> Box:
        # every lp-ball with p >= 1 sits inside its l-inf counterpart
        return Box(self.center - self.radius, self.center + self.radius)

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.radius > 0, d / np.where(self.radius > 0, self.radius, 1), 0.0)
        off_axis = np.any((self.radius == 0) & (np.abs(d) > tol), axis=-1)
        return (np.linalg.norm(z, ord=self.norm_order, axis=-1) <= 1 + tol) & ~off_axis


@dataclass(frozen=True, eq=False)
class HPolytope:
    """``{x : A x <= b}``; offsets must be finite."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = _vec(self.b)
        if A.shape[0] != b.size:
            raise DimensionMismatch(f"A has {A.shape[0]} rows, b has {b.size} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.A.T <= self.b + tol, axis=-1)

    def intersect(self, other: "HPolytope | Box") -> "HPolytope":
        other = as_polytope(other)
        return HPolytope(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]))

    def __eq__(self, other):
        return (
            isinstance(other, HPolytope)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
        )


StateSet = Union[Box, LpBall, HPolytope]


@dataclass
class SetUnion:
    members: list = field(default_factory=list)

    def __iter__(self) -> Iterator[StateSet]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=bool)
        for m in self.members:
            out |= m.contains(x, tol)
        return out

    def hull(self) -> Box:
        if not self.members:
            raise EmptyDomain("hull of an empty union")
        boxes = [box_hull(m) for m in self.members]
        return Box(np.min([b.lo for b in boxes], axis=0), np.max([b.hi for b in boxes], axis=0))


def as_polytope(s: StateSet) -> HPolytope:
    if isinstance(s, HPolytope):
        return s
    if isinstance(s, Box):
        return s.to_polytope()
    if isinstance(s, LpBall) and np.isinf(s.norm_order):
        return s.to_box().to_polytope()
    raise TypeError(f"no polytope form for {type(s).__name__} with p={getattr(s, 'norm_order', None)}")


def lp_solve(c, constraints: HPolytope | Box) -> lp.LPResult:
    """Maximise ``c.x`` over a polytope; see :func:`nfreach.lp.lp_solve`."""
    P = as_polytope(constraints)
    return lp.lp_solve(c, P.A, P.b)


def support_value(direction, s: StateSet) -> float:
    """max over the set of ``direction . x``."""
    d = _vec(direction)
    if d.size != s.dim:
        raise DimensionMismatch(f"direction has dim {d.size}, set has dim {s.dim}")
    if isinstance(s, Box):
        return float(np.sum(np.maximum(d * s.lo, d * s.hi)))
    if isinstance(s, LpBall):
        return float(np.linalg.norm(s.radius * d, ord=s.dual_order) + d @ s.center)
    return lp_solve(d, s).value


def is_empty(s: HPolytope | Box) -> bool:
    if isinstance(s, Box):
        return False
    return not lp.is_feasible(s.A, s.b)


def box_hull(s: StateSet) -> Box:
    """Smallest axis-aligned box containing ``s``."""
    if isinstance(s, Box):
        return s
    if isinstance(s, LpBall):
        return s.to_box()
    if isinstance(s, SetUnion):
        return s.hull()
    n = s.dim
    eye = np.eye(n)
    hi = np.array([lp_solve(eye[k], s).value for k in range(n)])
    lo = np.array([-lp_solve(-eye[k], s).value for k in range(n)])
    # LP round-off can produce lo a hair above hi on flat sets
    lo = np.minimum(lo, hi)
    return Box(lo, hi)


def check_containment(inner: StateSet, outer: StateSet, tol: float = 1e-9) -> bool:
    """True iff every point of ``inner`` lies in ``outer``; an empty union is contained in anything."""
    if isinstance(inner, SetUnion):
        return all(check_containment(m, outer, tol) for m in inner)
    if isinstance(outer, SetUnion):
        # only single-member unions have an exact convex test
        if len(outer) != 1:
            raise TypeError("containment in a multi-member union is not supported")
        outer = outer.members[0]
    if inner.dim != outer.dim:
        raise DimensionMismatch("containment between sets of different dimension")
    if isinstance(outer, Box):
        h = box_hull(inner)
        return bool(np.all(h.lo >= outer.lo - tol) and np.all(h.hi <= outer.hi + tol))
    if isinstance(outer, LpBall) and np.isinf(outer.norm_order):
        return check_containment(inner, outer.to_box(), tol)
    P = as_polytope(outer)
    for a, beta in zip(P.A, P.b):
        if support_value(a, inner) > beta + tol * max(1.0, abs(beta)):
            return False
    return True


def check_disjoint(a: StateSet, b: StateSet) -> bool:
    """True iff ``a`` and ``b`` share no point; empty unions are disjoint from everything."""
    if isinstance(a, SetUnion):
        return all(check_disjoint(m, b) for m in a)
    if isinstance(b, SetUnion):
        return all(check_disjoint(a, m) for m in b)
    if a.dim != b.dim:
        raise DimensionMismatch("disjointness between sets of different dimension")
    if isinstance(a, Box) and isinstance(b, Box):
        return bool(np.any(a.lo > b.hi) or np.any(b.lo > a.hi))
    return is_empty(as_polytope(a).intersect(as_polytope(b)))


def halfspace(normal: Sequence[float], offset: float) -> HPolytope:
    """``{x : normal . x <= offset}``."""
    return HPolytope(np.atleast_2d(normal), [offset])


def sample_polytope(P: HPolytope, n: int, rng: np.random.Generator, max_tries: int | None = None) -> np.ndarray:
    """Rejection-sample up to ``n`` points uniformly from a bounded polytope."""
    hull = box_hull(P)
    max_tries = 100 * n if max_tries is None else max_tries
    out = []
    drawn = 0
    while sum(len(o) for o in out) < n and drawn < max_tries:
        k = min(max(n, 64), max_tries - drawn)
        pts = hull.sample(k, rng)
        drawn += k
        out.append(pts[P.contains(pts, tol=0.0)])
    if not out:
        return np.empty((0, P.dim))
    return np.concatenate(out)[:n]


__all__ = [
    "Box",
    "LpBall",
    "HPolytope",
    "SetUnion",
    "StateSet",
    "InfeasibleError",
    "as_polytope",
    "lp_solve",
    "support_value",
    "is_empty",
    "box_hull",
    "check_containment",
    "check_disjoint",
    "halfspace",
    "sample_polytope",
]
