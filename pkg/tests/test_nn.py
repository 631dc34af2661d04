import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfreach.errors import DimensionMismatch, LimitOrderViolation
from nfreach.nn import (Activation, FeedforwardNetwork, Layer, SlopeMode, SlopePolicy, augment_with_control_limits,
                        concretize, crown_envelope, crown_envelopes, evaluate, relu_relaxation)
from nfreach.sets import Box


def reference_forward(weights, biases, y):
    # independent loop-based forward pass
    out = []
    for row in np.atleast_2d(y):
        a = list(row)
        for k, (W, b) in enumerate(zip(weights, biases)):
            z = [sum(W[i][j] * a[j] for j in range(len(a))) + b[i] for i in range(len(b))]
            a = z if k == len(weights) - 1 else [max(v, 0.0) for v in z]
        out.append(a)
    return np.array(out)


def scalar_relu():
    return FeedforwardNetwork([Layer([[1.0]], [0.0], "relu"), Layer([[1.0]], [0.0], "identity")])


def random_net(rng, depth=None, max_width=16, n_in=None, n_out=None):
    depth = depth or int(rng.integers(1, 5))
    n_in = n_in or int(rng.integers(1, 5))
    n_out = n_out or int(rng.integers(1, 4))
    hidden = [int(rng.integers(1, max_width + 1)) for _ in range(depth)]
    return FeedforwardNetwork.random(n_in, hidden, n_out, seed=int(rng.integers(2**31)))


class TestNetwork:
    def test_identity_layer(self):
        net = FeedforwardNetwork([Layer(np.eye(3), np.zeros(3), "identity")])
        assert np.allclose(net([1.0, -2.0, 3.0]), [1.0, -2.0, 3.0])

    def test_scalar_relu(self):
        net = scalar_relu()
        assert net([-2.0])[0] == 0.0 and net([3.0])[0] == 3.0

    def test_matches_reference(self):
        net = FeedforwardNetwork.random(2, [5, 5], 1, seed=7)
        ys = np.random.default_rng(0).normal(size=(1000, 2))
        Ws = [l.W.tolist() for l in net.layers]
        bs = [l.b.tolist() for l in net.layers]
        assert np.allclose(evaluate(net, ys), reference_forward(Ws, bs, ys), atol=1e-12, rtol=0)

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            FeedforwardNetwork([Layer(np.ones((2, 3)), np.zeros(2)), Layer(np.ones((1, 3)), [0.0], "identity")])
        with pytest.raises(DimensionMismatch):
            scalar_relu()([1.0, 2.0])
        with pytest.raises(ValueError):
            FeedforwardNetwork([Layer([[1.0]], [0.0], "relu")])

    def test_weights_read_only(self):
        layer = Layer([[1.0]], [0.0])
        with pytest.raises(ValueError):
            layer.W[0, 0] = 2.0


class TestRelaxation:
    def test_crossing(self):
        su, tu, sl = relu_relaxation(np.array([-1.0]), np.array([1.0]), zero_lower=True)
        assert (su[0], tu[0], sl[0]) == (0.5, 0.5, 0.0)

    def test_adaptive_lower(self):
        _, _, sl = relu_relaxation(np.array([-1.0, -3.0]), np.array([2.0, 1.0]), zero_lower=False)
        assert list(sl) == [1.0, 0.0]

    def test_stable(self):
        su, tu, sl = relu_relaxation(np.array([1.0, -3.0, 2.0]), np.array([2.0, -1.0, 2.0]), zero_lower=False)
        assert list(su) == [1.0, 0.0, 1.0] and list(tu) == [0.0, 0.0, 0.0] and list(sl) == [1.0, 0.0, 1.0]


class TestEnvelope:
    def test_affine_network_is_exact(self):
        W = np.array([[1.0, 2.0], [-1.0, 0.5]])
        b = np.array([0.3, -0.2])
        env = crown_envelope(FeedforwardNetwork([Layer(W, b, "identity")]), Box([-1, -1], [1, 1]))
        assert np.allclose(env.Psi, W) and np.allclose(env.Phi, W)
        assert np.allclose(env.alpha, b) and np.allclose(env.beta, b)

    def test_scalar_relu_zero_lower(self):
        env = crown_envelope(scalar_relu(), Box([-1.0], [1.0]), SlopePolicy(SlopeMode.ZERO_LOWER))
        assert env.Psi[0, 0] == pytest.approx(0.5) and env.alpha[0] == pytest.approx(0.5)
        assert env.Phi[0, 0] == 0.0 and env.beta[0] == 0.0
        out = concretize(env)
        assert out.lo[0] == pytest.approx(0.0) and out.hi[0] == pytest.approx(1.0)

    def test_identity_concretize(self):
        net = FeedforwardNetwork([Layer([[1.0]], [0.0], "identity")])
        out = concretize(crown_envelope(net, Box([-1.0], [1.0])))
        assert out.lo[0] == -1.0 and out.hi[0] == 1.0

    def test_rejects_non_box(self):
        with pytest.raises(TypeError):
            crown_envelope(scalar_relu(), [(-1.0, 1.0)])

    def test_batched_matches_single(self):
        rng = np.random.default_rng(3)
        net = FeedforwardNetwork.random(3, [8, 6], 2, seed=4)
        boxes = [Box(c - 0.5, c + 0.5) for c in rng.normal(size=(5, 3))]
        batch = crown_envelopes(net, boxes)
        for i, b in enumerate(boxes):
            single = crown_envelope(net, b)
            assert np.allclose(batch[i].Psi, single.Psi, atol=1e-13)
            assert np.allclose(batch[i].alpha, single.alpha, atol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from(["crown", "interval"]),
           st.sampled_from([SlopeMode.ADAPTIVE, SlopeMode.ZERO_LOWER]))
    def test_soundness(self, seed, bounds, mode):
        rng = np.random.default_rng(seed)
        net = random_net(rng)
        c = rng.normal(size=net.input_dim)
        box = Box(c - rng.uniform(0, 2, net.input_dim), c + rng.uniform(0, 2, net.input_dim))
        env = crown_envelope(net, box, SlopePolicy(mode), bounds)
        ys = box.sample(2000, rng)
        out = net(ys)
        assert np.all(env.lower(ys) <= out + 1e-9)
        assert np.all(out <= env.upper(ys) + 1e-9)
        cb = concretize(env)
        assert np.all(cb.contains(out, tol=1e-9))

    def test_random_five_five_net(self):
        rng = np.random.default_rng(11)
        net = FeedforwardNetwork.random(2, [5, 5], 1, seed=11)
        for _ in range(5):
            c = rng.normal(size=2)
            box = Box(c - 0.7, c + 0.7)
            env = crown_envelope(net, box)
            ys = box.sample(10_000, rng)
            out = net(ys)
            assert np.all(env.lower(ys) - 1e-9 <= out) and np.all(out <= env.upper(ys) + 1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_interval_concretize_monotone(self, seed):
        rng = np.random.default_rng(seed)
        net = random_net(rng, n_in=2)
        big = Box([-1.0, -1.0], [1.0, 1.0])
        lo = rng.uniform(-1, 1, 2)
        sub = Box(lo, np.minimum(lo + rng.uniform(0, 1, 2), 1.0))
        policy = SlopePolicy(SlopeMode.ZERO_LOWER)
        outer = concretize(crown_envelope(net, big, policy, bounds="interval"))
        inner = concretize(crown_envelope(net, sub, policy, bounds="interval"))
        assert np.all(inner.lo >= outer.lo - 1e-9) and np.all(inner.hi <= outer.hi + 1e-9)


class TestAugmentation:
    def const_net(self, value):
        return FeedforwardNetwork([Layer([[0.0]], [value], "identity")])

    def test_clips_high(self):
        aug = augment_with_control_limits(self.const_net(2.0), [-1.0], [1.0])
        assert aug([0.0])[0] == 1.0

    def test_inside_unchanged(self):
        aug = augment_with_control_limits(self.const_net(0.5), [-1.0], [1.0])
        assert aug([0.0])[0] == 0.5

    def test_structure(self):
        net = FeedforwardNetwork.random(2, [5, 5], 1, seed=0)
        aug = augment_with_control_limits(net, [-1.0], [1.0])
        assert len(aug.layers) == len(net.layers) + 2
        assert aug.zero_lower_layers == {2, 3}
        assert aug.layers[2].activation is Activation.RELU
        assert np.allclose(aug.layers[2].b, net.layers[-1].b + 1.0)
        assert np.allclose(aug.layers[3].W, -1) and np.allclose(aug.layers[3].b, 2.0)
        assert np.allclose(aug.layers[4].b, 1.0)

    def test_order_violation(self):
        with pytest.raises(LimitOrderViolation):
            augment_with_control_limits(self.const_net(0.0), [1.0], [-1.0])

    def test_clip_oracle(self):
        rng = np.random.default_rng(5)
        net = FeedforwardNetwork.random(3, [8, 8], 2, seed=5, scale=3.0)
        lo, hi = np.array([-1.0, -0.5]), np.array([1.0, 0.25])
        aug = augment_with_control_limits(net, lo, hi)
        ys = rng.normal(size=(1000, 3)) * 3
        assert np.max(np.abs(aug(ys) - np.clip(net(ys), lo, hi))) <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_envelope_within_limits(self, seed):
        rng = np.random.default_rng(seed)
        net = FeedforwardNetwork.random(2, [5, 5], 1, seed=seed % 1000, scale=3.0)
        aug = augment_with_control_limits(net, [-1.0], [1.0])
        c = rng.normal(size=2) * 3
        box = Box(c - rng.uniform(0, 3, 2), c + rng.uniform(0, 3, 2))
        out = concretize(crown_envelope(net=aug, domain=box))
        assert out.hi[0] <= 1 + 1e-9 and out.lo[0] >= -1 - 1e-9
        assert np.all(np.abs(aug(box.sample(500, rng))) <= 1 + 1e-12)
