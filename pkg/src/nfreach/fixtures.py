"""Benchmark problems shipped as ready-to-run analysis configs.

Trained controller weights are not available for these benchmarks, so each
fixture carries a seeded random network (or, for the reach-avoid scenario, a
hand-built stabilising one) written out explicitly in the config.
"""

from __future__ import annotations

import copy

import numpy as np

from .dynamics import euler_discretize
from .errors import UnknownFixture
from .nn import FeedforwardNetwork

DI_A = [[1.0, 1.0], [0.0, 1.0]]
DI_B = [[0.5], [1.0]]
DI_X0 = {"kind": "box", "lo": [2.5, -0.25], "hi": [3.0, 0.25]}
DI_NET_SEED = 1

GRAVITY = 9.8
QUAD_DT = 0.1
QUAD_NET_SEED = 0
QUAD_X0 = {
    "kind": "box",
    "lo": [4.69, 4.65, 2.975, 0.9499, -0.0001, -0.0001],
    "hi": [4.71, 4.75, 3.025, 0.9501, 0.0001, 0.0001],
}

# linear gain realised exactly as relu(-Kx) - relu(Kx); closed-loop poles at 0.5
REACH_AVOID_GAIN = [[0.25, 0.875]]
REACH_AVOID_X0 = {"kind": "box", "lo": [-2.0, -0.25], "hi": [-1.5, 0.25]}


def network_to_config(net: FeedforwardNetwork) -> dict:
    return {
        "layers": [
            {"W": layer.W.tolist(), "b": layer.b.tolist(), "activation": layer.activation.value}
            for layer in net.layers
        ]
    }


def di_network(seed: int = DI_NET_SEED) -> FeedforwardNetwork:
    return FeedforwardNetwork.random(2, [5, 5], 1, seed=seed)


def reach_avoid_network() -> FeedforwardNetwork:
    K = np.asarray(REACH_AVOID_GAIN)
    return FeedforwardNetwork.from_weights([np.vstack([-K, K]), np.array([[1.0, -1.0]])], [np.zeros(2), np.zeros(1)])


def _di_system() -> dict:
    return {"A": DI_A, "B": DI_B, "u_limits": [[-1.0, 1.0]]}


def quadrotor_matrices(dt: float = QUAD_DT, g: float = GRAVITY):
    A_c = np.zeros((6, 6))
    A_c[:3, 3:] = np.eye(3)
    B_c = np.zeros((6, 3))
    B_c[3:] = [[g, 0, 0], [0, -g, 0], [0, 0, 1]]
    c_c = np.zeros(6)
    c_c[-1] = -g
    return euler_discretize(A_c, B_c, c_c, dt)


def double_integrator() -> dict:
    return {
        "system": _di_system(),
        "network": network_to_config(di_network()),
        "set": dict(DI_X0),
        "analysis": {
            "mode": "forward",
            "horizon": 5,
            "partitioner": {"strategy": "none"},
            "solver": "closed-form",
            "seed": 0,
            "mc_samples": 1000,
        },
    }


def double_integrator_backward() -> dict:
    return {
        "system": _di_system(),
        "network": network_to_config(di_network()),
        "set": dict(DI_X0),
        "analysis": {
            "mode": "backward",
            "horizon": 1,
            "partitioner": {"strategy": "uniform", "cells": [16, 16]},
            "seed": 0,
        },
    }


def di_reach_avoid() -> dict:
    return {
        "system": _di_system(),
        "network": network_to_config(reach_avoid_network()),
        "set": dict(REACH_AVOID_X0),
        "analysis": {
            "mode": "verify",
            "horizon": 5,
            "partitioner": {"strategy": "uniform", "cells": [4, 4]},
            "solver": "closed-form",
            "seed": 0,
            "mc_samples": 1000,
            "goal": {"kind": "box", "lo": [-0.5, -0.25], "hi": [0.5, 0.25]},
            "avoid": [{"kind": "polytope", "A": [[-1.0, 0.0]], "b": [-0.35]}],
        },
    }


def quadrotor_6d(noise: bool = True) -> dict:
    A, B, c = quadrotor_matrices()
    u_hi = [np.pi / 9, np.pi / 9, 2 * GRAVITY]
    u_lo = [-np.pi / 9, -np.pi / 9, 0.0]
    system = {
        "A": A.tolist(),
        "B": B.tolist(),
        "c": c.tolist(),
        "C": np.eye(6).tolist(),
        "u_limits": [[lo, hi] for lo, hi in zip(u_lo, u_hi)],
    }
    if noise:
        system["nu"] = [[-0.001, 0.001]] * 6
        system["omega"] = [[-0.005, 0.005]] * 6
    net = FeedforwardNetwork.random(6, [32, 32], 3, seed=QUAD_NET_SEED)
    return {
        "system": system,
        "network": network_to_config(net),
        "set": dict(QUAD_X0),
        "analysis": {
            "mode": "forward",
            "horizon": 12,
            "partitioner": {"strategy": "none"},
            "solver": "closed-form",
            "seed": 0,
            "mc_samples": 1000,
        },
    }


FIXTURES = {
    "double_integrator": double_integrator,
    "double_integrator_backward": double_integrator_backward,
    "di_reach_avoid": di_reach_avoid,
    "quadrotor_6d": quadrotor_6d,
}


def fixture_config(name: str) -> dict:
    try:
        build = FIXTURES[name]
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    # fresh nested lists so callers can edit the result freely
    return copy.deepcopy(build())
