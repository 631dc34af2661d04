"""Feed-forward ReLU control policies and their linear relaxations.

:func:`crown_envelope` returns two affine functions sandwiching the network
output over an input box.  Pre-activation bounds are computed either with the
envelopes themselves (``bounds="crown"``, default) or with plain interval
arithmetic (``bounds="interval"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDomain, LimitOrderViolation
from .sets import Box, support_value


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass(frozen=True)
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).ravel()
        if W.shape[0] != b.size:
            raise DimensionMismatch(f"layer W has {W.shape[0]} rows, b has {b.size} entries")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "activation", Activation(self.activation))


class FeedforwardNetwork:
    """Ordered affine layers, each followed by its activation.

    The final layer must be affine (identity activation).  ``zero_lower_layers``
    names layer indices whose ReLUs must be relaxed with a zero lower slope;
    :func:`augment_with_control_limits` fills it in.
    """

    def __init__(
        self,
        layers: Iterable[Layer],
        zero_lower_layers: Iterable[int] = (),
        control_limits: tuple | None = None,
    ):
        self.layers: tuple[Layer, ...] = tuple(
            l if isinstance(l, Layer) else Layer(*l) for l in layers
        )
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for k in range(1, len(self.layers)):
            prev, cur = self.layers[k - 1], self.layers[k]
            if cur.W.shape[1] != prev.W.shape[0]:
                raise DimensionMismatch(
                    f"layer {k} expects {cur.W.shape[1]} inputs but layer {k - 1} emits {prev.W.shape[0]}"
                )
        if self.layers[-1].activation is not Activation.IDENTITY:
            raise ValueError("final layer activation must be identity")
        self.zero_lower_layers = frozenset(int(k) for k in zero_lower_layers)
        # (u_lo, u_hi) the output is already clipped to, if any
        self.control_limits = control_limits

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    def __call__(self, y):
        return evaluate(self, y)

    def __repr__(self):
        widths = [self.input_dim] + [l.W.shape[0] for l in self.layers]
        return f"FeedforwardNetwork(widths={widths})"

    @classmethod
    def from_weights(cls, weights: Sequence, biases: Sequence, hidden_activation="relu"):
        """Hidden layers use ``hidden_activation``; the last one is affine."""
        n = len(weights)
        return cls(
            Layer(W, b, Activation.IDENTITY if k == n - 1 else hidden_activation)
            for k, (W, b) in enumerate(zip(weights, biases))
        )

    @classmethod
    def random(cls, n_in: int, hidden: Sequence[int], n_out: int, seed: int = 0, scale: float = 1.0):
        rng = np.random.default_rng(seed)
        widths = [n_in, *hidden, n_out]
        Ws, bs = [], []
        for a, b in zip(widths[:-1], widths[1:]):
            Ws.append(scale * rng.normal(size=(b, a)) / np.sqrt(a))
            bs.append(scale * 0.1 * rng.normal(size=b))
        return cls.from_weights(Ws, bs)


def evaluate(net: FeedforwardNetwork, y) -> np.ndarray:
    """Exact forward pass; accepts a single input or a batch (rows)."""
    a = np.asarray(y, dtype=float)
    if a.shape[-1] != net.input_dim:
        raise DimensionMismatch(f"network expects input dim {net.input_dim}, got {a.shape[-1]}")
    for layer in net.layers:
        a = a @ layer.W.T + layer.b
        if layer.activation is Activation.RELU:
            a = np.maximum(a, 0.0)
    return a


class SlopeMode(str, Enum):
    ADAPTIVE = "adaptive"
    ZERO_LOWER = "zero_lower"


@dataclass(frozen=True)
class SlopePolicy:
    mode: SlopeMode = SlopeMode.ADAPTIVE
    zero_lower_layers: frozenset = field(default_factory=frozenset)

    def lower_is_zero(self, layer: int) -> bool:
        return self.mode is SlopeMode.ZERO_LOWER or layer in self.zero_lower_layers

    @classmethod
    def for_network(cls, net: FeedforwardNetwork, mode: SlopeMode = SlopeMode.ADAPTIVE) -> "SlopePolicy":
        return cls(SlopeMode(mode), frozenset(net.zero_lower_layers))


@dataclass(frozen=True)
class AffineEnvelope:
    """``Phi y + beta <= pi(y) <= Psi y + alpha`` for every y in ``domain``."""

    Psi: np.ndarray
    Phi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    domain: Box
    # (lower, upper) pre-activation bounds per layer; None for identity layers
    preact_bounds: tuple = ()

    def upper(self, y) -> np.ndarray:
        return np.asarray(y) @ self.Psi.T + self.alpha

    def lower(self, y) -> np.ndarray:
        return np.asarray(y) @ self.Phi.T + self.beta


@dataclass(frozen=True)
class EnvelopeBatch:
    """Envelopes over several domains, stacked along a leading axis."""

    Psi: np.ndarray  # (N, n_u, n_y)
    Phi: np.ndarray
    alpha: np.ndarray  # (N, n_u)
    beta: np.ndarray
    domains: tuple
    preact_bounds: tuple = ()

    def __len__(self):
        return len(self.domains)

    def __getitem__(self, i: int) -> AffineEnvelope:
        pre = tuple(None if b is None else (b[0][i], b[1][i]) for b in self.preact_bounds)
        return AffineEnvelope(self.Psi[i], self.Phi[i], self.alpha[i], self.beta[i], self.domains[i], pre)


def relu_relaxation(lo: np.ndarray, hi: np.ndarray, zero_lower: bool):
    """Slopes and intercepts of linear bounds on ReLU over ``[lo, hi]``.

    Returns ``(su, tu, sl)``: ``sl z <= relu(z) <= su z + tu``.
    """
    active = lo >= 0
    cross = (lo < 0) & (hi > 0)
    width = np.where(cross, hi - lo, 1.0)
    su = np.where(cross, hi / width, active.astype(float))
    tu = np.where(cross, -lo * hi / width, 0.0)
    if zero_lower:
        sl = active.astype(float)
    else:
        sl = np.where(cross, (hi >= -lo).astype(float), active.astype(float))
    return su, tu, sl


def _stacked_relaxation(su, tu, sl):
    # index 0 of axis 1 is the upper bound, index 1 the lower bound
    zero = np.zeros_like(tu)
    Sp = np.stack([su, sl], axis=1)[:, :, None, :]
    Sn = np.stack([sl, su], axis=1)[:, :, None, :]
    Tp = np.stack([tu, zero], axis=1)[:, :, None, :]
    Tn = np.stack([zero, tu], axis=1)[:, :, None, :]
    return Sp, Sn, Tp, Tn


def _backward(net, relax, k: int, n_batch: int):
    """Linear upper and lower bounds on the layer-k pre-activation in terms of the input.

    Returns ``A (N, 2, r, n_in)`` and ``const (N, 2, r)``; axis 1 is (upper, lower).
    ``relax[l]`` holds the stacked relaxation of each ReLU layer ``l < k``.
    """
    layer = net.layers[k]
    A = np.broadcast_to(layer.W, (n_batch, 2) + layer.W.shape)
    const = np.broadcast_to(layer.b, (n_batch, 2, layer.b.size)).copy()
    for l in range(k - 1, -1, -1):
        if net.layers[l].activation is Activation.RELU:
            Sp, Sn, Tp, Tn = relax[l]
            pos = np.maximum(A, 0.0)
            neg = np.minimum(A, 0.0)
            const += np.sum(pos * Tp + neg * Tn, axis=-1)
            A = pos * Sp + neg * Sn
        const += A @ net.layers[l].b
        A = A @ net.layers[l].W
    return A, const


def _concretize_rows(A, const, center, radius):
    """``(upper max, lower min)`` of the stacked bounds over boxes ``center +- radius``."""
    mid = np.einsum("nsri,ni->nsr", A, center) + const
    spread = np.einsum("nsri,ni->nsr", np.abs(A), radius)
    return mid[:, 0] + spread[:, 0], mid[:, 1] - spread[:, 1]


def crown_envelopes(
    net: FeedforwardNetwork,
    domains: Sequence[Box],
    policy: SlopePolicy | None = None,
    bounds: str = "crown",
) -> EnvelopeBatch:
    """Batched :func:`crown_envelope` over several input boxes."""
    domains = tuple(domains)
    if not domains:
        raise ValueError("need at least one domain")
    for d in domains:
        if not isinstance(d, Box):
            raise TypeError("crown_envelope needs a Box domain")
        if d.dim != net.input_dim:
            raise DimensionMismatch(f"domain dim {d.dim} != network input dim {net.input_dim}")
    if policy is None:
        policy = SlopePolicy.for_network(net)
    if bounds not in ("crown", "interval"):
        raise ValueError(f"unknown bounds mode {bounds!r}")

    N = len(domains)
    lo0 = np.array([d.lo for d in domains])
    hi0 = np.array([d.hi for d in domains])
    center, radius = (lo0 + hi0) / 2, (hi0 - lo0) / 2
    relax: dict[int, tuple] = {}
    preact = []
    a_lo, a_hi = lo0, hi0  # interval bounds on the current activation
    for k, layer in enumerate(net.layers):
        if layer.activation is Activation.RELU:
            if bounds == "crown":
                A, const = _backward(net, relax, k, N)
                hi, lo = _concretize_rows(A, const, center, radius)
            else:
                Wp, Wn = np.maximum(layer.W, 0), np.minimum(layer.W, 0)
                hi = a_hi @ Wp.T + a_lo @ Wn.T + layer.b
                lo = a_lo @ Wp.T + a_hi @ Wn.T + layer.b
            lo = np.minimum(lo, hi)
            preact.append((lo, hi))
            relax[k] = _stacked_relaxation(*relu_relaxation(lo, hi, policy.lower_is_zero(k)))
            a_lo, a_hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
        else:
            preact.append(None)
            Wp, Wn = np.maximum(layer.W, 0), np.minimum(layer.W, 0)
            a_lo, a_hi = a_lo @ Wp.T + a_hi @ Wn.T + layer.b, a_hi @ Wp.T + a_lo @ Wn.T + layer.b

    A, const = _backward(net, relax, len(net.layers) - 1, N)
    return EnvelopeBatch(A[:, 0], A[:, 1], const[:, 0], const[:, 1], domains, tuple(preact))


def crown_envelope(
    net: FeedforwardNetwork,
    domain: Box,
    policy: SlopePolicy | None = None,
    bounds: str = "crown",
) -> AffineEnvelope:
    if not isinstance(domain, Box):
        raise TypeError("crown_envelope needs a Box domain")
    return crown_envelopes(net, [domain], policy, bounds)[0]


def concretize(env: AffineEnvelope) -> Box:
    """Output box guaranteed to contain the network image of ``env.domain``."""
    hi = np.array([support_value(row, env.domain) for row in env.Psi]) + env.alpha
    lo = np.array([-support_value(-row, env.domain) for row in env.Phi]) + env.beta
    return Box(np.minimum(lo, hi), hi)


def augment_with_control_limits(net: FeedforwardNetwork, u_lo, u_hi) -> FeedforwardNetwork:
    """Append two ReLU stages so the network output equals ``clip(pi(y), u_lo, u_hi)``."""
    u_lo = np.atleast_1d(np.asarray(u_lo, dtype=float))
    u_hi = np.atleast_1d(np.asarray(u_hi, dtype=float))
    n_u = net.output_dim
    if u_lo.size != n_u or u_hi.size != n_u:
        raise DimensionMismatch(f"control limits must have dim {n_u}")
    if np.any(u_lo > u_hi):
        raise LimitOrderViolation(f"u_lo > u_hi at indices {np.flatnonzero(u_lo > u_hi).tolist()}")
    *body, last = net.layers
    m = len(net.layers) - 1
    eye = np.eye(n_u)
    layers = [
        *body,
        Layer(last.W, last.b - u_lo, Activation.RELU),
        Layer(-eye, u_hi - u_lo, Activation.RELU),
        Layer(-eye, u_hi, Activation.IDENTITY),
    ]
    if net.control_limits is not None:
        u_lo = np.maximum(u_lo, net.control_limits[0])
        u_hi = np.minimum(u_hi, net.control_limits[1])
    return FeedforwardNetwork(
        layers,
        zero_lower_layers=set(net.zero_lower_layers) | {m, m + 1},
        control_limits=(u_lo, u_hi),
    )


def with_limits(net: FeedforwardNetwork, u_limits) -> FeedforwardNetwork:
    """``net`` augmented for ``u_limits`` unless it already clips to them."""
    if u_limits is None:
        return net
    lim = net.control_limits
    if lim is not None and np.array_equal(lim[0], u_limits[0]) and np.array_equal(lim[1], u_limits[1]):
        return net
    return augment_with_control_limits(net, *u_limits)
