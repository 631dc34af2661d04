import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfreach.errors import DimensionMismatch, EmptyDomain
from nfreach.sets import (Box, HPolytope, LpBall, SetUnion, box_hull, check_containment, check_disjoint,
                          halfspace, is_empty, lp_solve, sample_polytope, support_value)


def unit_box_poly(lo=-1.0, hi=1.0, n=2):
    return Box(np.full(n, lo), np.full(n, hi)).to_polytope()


def vertices(P: HPolytope):
    """Brute-force vertex enumeration for small 2-D polytopes."""
    out = []
    for i, j in itertools.combinations(range(len(P.b)), 2):
        M = P.A[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, P.b[[i, j]])
        if np.all(P.A @ v <= P.b + 1e-9):
            out.append(v)
    return np.array(out)


class TestBox:
    def test_invalid_order(self):
        with pytest.raises(EmptyDomain):
            Box([1.0], [0.0])

    def test_conversions(self):
        b = Box([0.0, -1.0], [2.0, 1.0])
        ball = b.to_ball()
        assert np.allclose(ball.center, [1, 0]) and np.allclose(ball.radius, [1, 1])
        assert np.isinf(ball.norm_order)
        P = b.to_polytope()
        assert P.A.shape == (4, 2)
        assert P.contains([2.0, 1.0]) and not P.contains([2.1, 0.0])

    def test_volume(self):
        assert Box([0, 0], [2, 3]).volume() == 6.0


class TestLpSolve:
    def test_box(self):
        assert lp_solve([1.0, 0.0], unit_box_poly()).value == pytest.approx(1.0)


class TestSupport:
    def test_box(self):
        assert support_value([1.0, 0.0], Box([2.5, -0.25], [3.0, 0.25])) == 3.0

    def test_ball(self):
        assert support_value([1.0, 0.0], LpBall([0.0, 0.0], [1.0, 1.0])) == 1.0

    def test_polytope_vertex_oracle(self):
        P = Box([-1.0, -1.0], [2.0, 1.0]).to_polytope()
        d = np.array([1.0, 1.0])
        assert support_value(d, P) == pytest.approx(3.0)
        assert support_value(d, P) == pytest.approx(max(vertices(P) @ d))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            support_value([1.0], Box([0, 0], [1, 1]))

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from([1.0, 1.5, 2.0, 3.0, np.inf]), st.integers(0, 2**31 - 1))
    def test_dual_norm_identity(self, p, seed):
        rng = np.random.default_rng(seed)
        ball = LpBall(rng.normal(size=2), rng.uniform(0.1, 2, size=2), p)
        d = rng.normal(size=2)
        # boundary points of the weighted ball, dense in angle
        theta = np.linspace(0, 2 * np.pi, 100_000)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        u /= np.linalg.norm(u, ord=p, axis=1, keepdims=True)
        pts = ball.center + u * ball.radius
        s = support_value(d, ball)
        sampled = np.max(pts @ d)
        assert sampled <= s + 1e-9
        assert s - sampled < 1e-6 * max(1.0, abs(s)) + 1e-4 * np.linalg.norm(d * ball.radius)


class TestEmpty:
    def test_cases(self):
        assert is_empty(HPolytope([[1.0], [-1.0]], [0.0, -1.0]))
        assert not is_empty(unit_box_poly())

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(10, 2))
        b = rng.normal(size=10)
        grid = np.stack(np.meshgrid(np.linspace(-5, 5, 201), np.linspace(-5, 5, 201)), -1).reshape(-1, 2)
        hit = np.any(np.all(grid @ A.T <= b, axis=1))
        if hit:
            assert not is_empty(HPolytope(A, b))


class TestHull:
    def test_box_poly(self):
        h = box_hull(Box([0.0, 0.0], [1.0, 1.0]).to_polytope())
        assert np.allclose(h.lo, 0) and np.allclose(h.hi, 1)

    def test_diamond(self):
        A = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
        h = box_hull(HPolytope(A, np.ones(4)))
        assert np.allclose(h.lo, -1) and np.allclose(h.hi, 1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_contains_samples_and_maximisers(self, seed):
        rng = np.random.default_rng(seed)
        A = np.vstack([rng.normal(size=(5, 2)), np.eye(2), -np.eye(2)])
        b = np.concatenate([rng.uniform(0.1, 1, 5), np.full(4, 2.0)])
        P = HPolytope(A, b)
        h = box_hull(P)
        pts = sample_polytope(P, 1000, rng)
        assert np.all(h.contains(pts))
        for _ in range(5):
            assert h.contains(lp_solve(rng.normal(size=2), P).x)
        inner = Box(np.maximum(h.lo, h.center - 1e-3), np.minimum(h.hi, h.center + 1e-3))
        assert check_containment(inner, h)


class TestContainment:
    def test_cases(self):
        inner = Box([0, 0], [1, 1])
        assert check_containment(inner, Box([-1, -1], [2, 2]))
        assert not check_containment(inner, HPolytope([[1.0, 0.0]], [0.5]))

    def test_empty_union_vacuous(self):
        assert check_containment(SetUnion(), Box([0, 0], [1, 1]))
        assert check_disjoint(SetUnion(), Box([0, 0], [1, 1]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_sampling_oracle(self, seed):
        rng = np.random.default_rng(seed)
        lo = rng.uniform(-1, 1, 2)
        inner = Box(lo, lo + rng.uniform(0, 1, 2))
        outer = HPolytope(rng.normal(size=(4, 2)), rng.uniform(0, 2, 4))
        pts = inner.sample(10_000, rng)
        if not np.all(outer.contains(pts, tol=0.0)):
            assert not check_containment(inner, outer)


class TestDisjoint:
    def test_cases(self):
        box = Box([0, 0], [1, 1])
        assert check_disjoint(box, halfspace([-1.0, 0.0], -2.0))
        assert not check_disjoint(box, halfspace([-1.0, 0.0], -0.35))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_sampling_oracle(self, seed):
        rng = np.random.default_rng(seed)
        box = Box([-1, -1], [1, 1])
        P = HPolytope(rng.normal(size=(3, 2)), rng.normal(size=3))
        pts = box.sample(10_000, rng)
        if np.any(P.contains(pts, tol=0.0)):
            assert not check_disjoint(box, P)


def test_union_membership():
    u = SetUnion([Box([0, 0], [1, 1]), Box([2, 2], [3, 3])])
    assert list(u.contains(np.array([[0.5, 0.5], [2.5, 2.5], [1.5, 1.5]]))) == [True, True, False]
    h = u.hull()
    assert np.allclose(h.lo, 0) and np.allclose(h.hi, 3)
