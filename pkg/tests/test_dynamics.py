import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfreach.dynamics import (LtvSystem, control, euler_discretize, observe, simulate_rollout, simulate_rollouts,
                              step, system_at)
from nfreach.errors import DimensionMismatch, LimitOrderViolation, NoiseOutOfSupport
from nfreach.nn import FeedforwardNetwork

from conftest import DI_A, DI_B, zero_net


def test_step_examples(di_free):
    assert np.allclose(step(di_free, [0.0, 1.0], [0.0]), [1.0, 1.0])
    assert np.allclose(step(di_free, [0.0, 1.0], [1.0]), [1.5, 2.0])
    ident = LtvSystem(np.eye(2), np.zeros((2, 1)))
    assert np.allclose(step(ident, [0.3, -0.7], [5.0]), [0.3, -0.7])


def test_noise_support_enforced():
    sys = LtvSystem(DI_A, DI_B, omega_lo=[-0.1, -0.1], omega_hi=[0.1, 0.1], nu_lo=[-0.001] * 2, nu_hi=[0.001] * 2)
    assert np.allclose(step(sys, [0.0, 0.0], [0.0], [0.1, -0.1]), [0.1, -0.1])
    with pytest.raises(NoiseOutOfSupport):
        step(sys, [0.0, 0.0], [0.0], [0.2, 0.0])
    assert np.allclose(observe(sys, [1.0, 2.0], [0.001, 0.001]), [1.001, 2.001])
    with pytest.raises(NoiseOutOfSupport):
        observe(sys, [1.0, 2.0], [0.01, 0.0])


def test_observe_matrix_oracle():
    rng = np.random.default_rng(0)
    C = rng.normal(size=(3, 2))
    sys = LtvSystem(np.eye(3), np.zeros((3, 1)), C=C)
    x = rng.normal(size=3)
    assert np.allclose(observe(sys, x), C.T @ x)
    assert observe(sys, x).shape == (2,)


def test_validation():
    with pytest.raises(DimensionMismatch):
        LtvSystem(np.eye(2), np.zeros((3, 1)))
    with pytest.raises(LimitOrderViolation):
        LtvSystem(np.eye(2), np.zeros((2, 1)), omega_lo=[1, 1], omega_hi=[0, 0])
    with pytest.raises(LimitOrderViolation):
        LtvSystem(np.eye(2), np.zeros((2, 1)), u_limits=([1.0], [-1.0]))


def test_rollout_examples(di_free):
    traj = simulate_rollout(di_free, zero_net(), [2.75, 0.0], 1, seed=0)
    assert np.allclose(traj, [[2.75, 0.0], [2.75, 0.0]])
    ident = LtvSystem(np.eye(2), np.zeros((2, 1)))
    traj = simulate_rollout(ident, FeedforwardNetwork.random(2, [4], 1, seed=1), [1.0, 2.0], 4, seed=3)
    assert all(np.allclose(s, [1.0, 2.0]) for s in traj)


def test_rollout_determinism():
    sys = LtvSystem(DI_A, DI_B, omega_lo=[-0.01] * 2, omega_hi=[0.01] * 2)
    net = FeedforwardNetwork.random(2, [5], 1, seed=2)
    a = simulate_rollout(sys, net, [1.0, 0.0], 6, seed=9)
    b = simulate_rollout(sys, net, [1.0, 0.0], 6, seed=9)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))


def test_rollout_controls_clipped(di):
    net = FeedforwardNetwork.random(2, [5, 5], 1, seed=0, scale=5.0)
    ys = np.random.default_rng(0).normal(size=(500, 2)) * 5
    u = control(di, net, ys)
    assert np.all(np.abs(u) <= 1.0)
    traj = simulate_rollouts(di, net, ys, 3, np.random.default_rng(1))
    # velocity change equals the applied control for this plant
    assert np.all(np.abs(np.diff(traj[:, :, 1], axis=0)) <= 1.0 + 1e-12)


def test_rollout_noise_in_support():
    lo, hi = np.array([-0.05, -0.02]), np.array([0.05, 0.03])
    sys = LtvSystem(np.eye(2), np.zeros((2, 1)), omega_lo=lo, omega_hi=hi)
    traj = simulate_rollouts(sys, zero_net(), np.zeros((2000, 2)), 1, np.random.default_rng(0))
    w = traj[1] - traj[0]
    assert np.all(w >= lo) and np.all(w <= hi)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_step_is_affine(seed):
    rng = np.random.default_rng(seed)
    n, m = 3, 2
    sys = LtvSystem(rng.normal(size=(n, n)), rng.normal(size=(n, m)), c=rng.normal(size=n),
                    omega_lo=-np.ones(n), omega_hi=np.ones(n))
    x1, x2 = rng.normal(size=(2, n))
    u1, u2 = rng.normal(size=(2, m))
    w1, w2 = rng.uniform(-0.5, 0.5, size=(2, n))
    base = step(sys, np.zeros(n), np.zeros(m), np.zeros(n))
    lhs = step(sys, x1 + x2, u1 + u2, w1 + w2) - base
    rhs = (step(sys, x1, u1, w1) - base) + (step(sys, x2, u2, w2) - base)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_system_sequence():
    a, b = LtvSystem(np.eye(1), [[1.0]]), LtvSystem(2 * np.eye(1), [[1.0]])
    assert system_at([a, b], 0) is a and system_at([a, b], 7) is b


def test_euler():
    A, B, c = euler_discretize([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [0.0, -9.8], 0.1)
    assert np.allclose(A, [[1, 0.1], [0, 1]]) and np.allclose(B, [[0], [0.1]]) and np.allclose(c, [0, -0.98])
