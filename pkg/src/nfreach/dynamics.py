"""Discrete-time linear plant with bounded noise and closed-loop simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, LimitOrderViolation, NoiseOutOfSupport
from .nn import FeedforwardNetwork, evaluate
from .sets import Box

NOISE_TOL = 1e-12


def _mat(M) -> np.ndarray:
    return np.atleast_2d(np.asarray(M, dtype=float))


def _vec(v, n: int, name: str) -> np.ndarray:
    if v is None:
        return np.zeros(n)
    out = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    if out.size != n:
        raise DimensionMismatch(f"{name} has dim {out.size}, expected {n}")
    return out


@dataclass(frozen=True, eq=False)
class LtvSystem:
    """``x+ = A x + B u + c + w``,  ``y = C^T x + v``.

    ``C`` is stored as an ``n_x x n_y`` matrix and applied transposed.  Noise
    supports default to zero; ``u_limits`` is an optional ``(u_lo, u_hi)`` pair.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray | None = None
    c: np.ndarray | None = None
    omega_lo: np.ndarray | None = None
    omega_hi: np.ndarray | None = None
    nu_lo: np.ndarray | None = None
    nu_hi: np.ndarray | None = None
    u_limits: tuple | None = None

    def __post_init__(self):
        A = _mat(self.A)
        n_x = A.shape[0]
        if A.shape != (n_x, n_x):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(n_x, -1) if B.ndim < 2 else B
        if B.shape[0] != n_x:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n_x}")
        C = np.eye(n_x) if self.C is None else _mat(self.C)
        if C.shape[0] != n_x:
            raise DimensionMismatch(f"C has {C.shape[0]} rows, expected {n_x}")
        n_y = C.shape[1]
        fields = {
            "A": A,
            "B": B,
            "C": C,
            "c": _vec(self.c, n_x, "c"),
            "omega_lo": _vec(self.omega_lo, n_x, "omega_lo"),
            "omega_hi": _vec(self.omega_hi, n_x, "omega_hi"),
            "nu_lo": _vec(self.nu_lo, n_y, "nu_lo"),
            "nu_hi": _vec(self.nu_hi, n_y, "nu_hi"),
        }
        if np.any(fields["omega_lo"] > fields["omega_hi"]):
            raise LimitOrderViolation("omega_lo > omega_hi")
        if np.any(fields["nu_lo"] > fields["nu_hi"]):
            raise LimitOrderViolation("nu_lo > nu_hi")
        limits = None
        if self.u_limits is not None:
            u_lo, u_hi = (_vec(v, B.shape[1], "u_limits") for v in self.u_limits)
            if np.any(u_lo > u_hi):
                raise LimitOrderViolation("u_lo > u_hi")
            limits = (u_lo, u_hi)
        fields["u_limits"] = limits
        for k, v in fields.items():
            object.__setattr__(self, k, v)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[1]

    @property
    def has_noise(self) -> bool:
        return bool(
            np.any(self.omega_lo != 0) or np.any(self.omega_hi != 0)
            or np.any(self.nu_lo != 0) or np.any(self.nu_hi != 0)
        )

    @property
    def u_box(self) -> Box | None:
        return None if self.u_limits is None else Box(*self.u_limits)

    def noise_free(self) -> "LtvSystem":
        """Same plant with noise supports collapsed to their midpoints."""
        w = (self.omega_lo + self.omega_hi) / 2
        v = (self.nu_lo + self.nu_hi) / 2
        return LtvSystem(self.A, self.B, self.C, self.c, w, w, v, v, self.u_limits)

    def without_noise(self) -> "LtvSystem":
        return LtvSystem(self.A, self.B, self.C, self.c, u_limits=self.u_limits)


def system_at(systems, t: int) -> LtvSystem:
    """Per-timestep system lookup; the last entry repeats past the end."""
    if isinstance(systems, LtvSystem):
        return systems
    return systems[min(t, len(systems) - 1)]


def _check_support(v, lo, hi, name):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != lo.size:
        raise DimensionMismatch(f"{name} has dim {v.shape[-1]}, expected {lo.size}")
    if np.any(v < lo - NOISE_TOL) or np.any(v > hi + NOISE_TOL):
        raise NoiseOutOfSupport(f"{name} outside its declared support")
    return v


def step(sys: LtvSystem, x, u, omega=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    omega = np.zeros(sys.n_x) if omega is None else _check_support(omega, sys.omega_lo, sys.omega_hi, "omega")
    return x @ sys.A.T + u @ sys.B.T + sys.c + omega


def observe(sys: LtvSystem, x, nu=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    nu = np.zeros(sys.n_y) if nu is None else _check_support(nu, sys.nu_lo, sys.nu_hi, "nu")
    return x @ sys.C + nu


def control(sys: LtvSystem, net: FeedforwardNetwork, y) -> np.ndarray:
    u = evaluate(net, y)
    if sys.u_limits is not None:
        u = np.clip(u, *sys.u_limits)
    return u


def simulate_rollouts(
    systems,
    net: FeedforwardNetwork,
    x0: np.ndarray,
    horizon: int,
    rng: np.random.Generator | None = None,
    noise: bool = True,
) -> np.ndarray:
    """Batched closed-loop rollouts.

    ``x0`` has shape ``(N, n_x)``; returns ``(horizon + 1, N, n_x)``.  With
    ``noise=False`` the noise is pinned to the midpoint of each support.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.atleast_2d(np.asarray(x0, dtype=float))
    traj = [x]
    for t in range(horizon):
        sys = system_at(systems, t)
        n = x.shape[0]
        if noise:
            nu = rng.uniform(sys.nu_lo, sys.nu_hi, size=(n, sys.n_y))
            omega = rng.uniform(sys.omega_lo, sys.omega_hi, size=(n, sys.n_x))
        else:
            nu = np.broadcast_to((sys.nu_lo + sys.nu_hi) / 2, (n, sys.n_y))
            omega = np.broadcast_to((sys.omega_lo + sys.omega_hi) / 2, (n, sys.n_x))
        u = control(sys, net, observe(sys, x, nu))
        x = step(sys, x, u, omega)
        traj.append(x)
    return np.stack(traj)


def simulate_rollout(systems, net: FeedforwardNetwork, x0, horizon: int, seed: int = 0) -> list[np.ndarray]:
    """Single seeded rollout; returns the ``horizon + 1`` visited states."""
    traj = simulate_rollouts(systems, net, np.atleast_2d(x0), horizon, np.random.default_rng(seed))
    return [s[0] for s in traj]


def euler_discretize(A_c, B_c, c_c, dt: float):
    """Forward-Euler map of ``xdot = A x + B u + c`` to a discrete step."""
    A_c, B_c, c_c = _mat(A_c), _mat(B_c), np.asarray(c_c, dtype=float)
    n = A_c.shape[0]
    return np.eye(n) + dt * A_c, dt * B_c, dt * c_c
