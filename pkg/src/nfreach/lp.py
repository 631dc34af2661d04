"""Dense-tableau two-phase simplex for ``max c.x  s.t.  A x <= b`` with free x.

Problems in this package are tiny (a handful of variables, a few dozen rows),
so the solver favours a plain tableau and Bland's anti-cycling rule over
speed tricks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InfeasibleError, SolverError, UnboundedError

TOL = 1e-8


class LPResult(NamedTuple):
    value: float
    x: np.ndarray


def _pivot(T: np.ndarray, obj: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    obj -= obj[col] * T[row]


def _run(T: np.ndarray, obj: np.ndarray, basis: list[int], ncols: int, max_iter: int) -> None:
    """Iterate to optimality over the first ``ncols`` columns (rhs is last)."""
    for _ in range(max_iter):
        candidates = np.flatnonzero(obj[:ncols] < -TOL)
        if candidates.size == 0:
            return
        col = int(candidates[0])
        column = T[:, col]
        pos = np.flatnonzero(column > TOL)
        if pos.size == 0:
            raise UnboundedError("objective is unbounded above on the feasible set")
        ratios = T[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + TOL * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, obj, row, col)
        basis[row] = col
    raise SolverError("simplex iteration limit reached")


def _normalise(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = np.abs(A).max(axis=1) if A.size else np.zeros(A.shape[0])
    zero = scale <= 0.0
    if np.any(b[zero] < -TOL):
        raise InfeasibleError("constraint 0 <= b with negative b")
    keep = ~zero
    return A[keep] / scale[keep, None], b[keep] / scale[keep]


def _phase_one(A: np.ndarray, b: np.ndarray):
    m, n = A.shape
    flip = b < 0
    sign = np.where(flip, -1.0, 1.0)
    n_art = int(flip.sum())
    ncols = 2 * n + m + n_art
    T = np.zeros((m, ncols + 1))
    T[:, :n] = A * sign[:, None]
    T[:, n : 2 * n] = -A * sign[:, None]
    T[:, 2 * n : 2 * n + m] = np.diag(sign)
    T[:, -1] = b * sign
    basis = []
    art_cols = []
    k = 0
    for i in range(m):
        if flip[i]:
            col = 2 * n + m + k
            T[i, col] = 1.0
            art_cols.append(col)
            basis.append(col)
            k += 1
        else:
            basis.append(2 * n + i)
    obj = np.zeros(ncols + 1)
    if n_art:
        obj[art_cols] = 1.0
        for i in np.flatnonzero(flip):
            obj -= T[i]
        _run(T, obj, basis, ncols, max_iter=50 * (ncols + m) + 100)
        if obj[-1] < -TOL * max(1.0, np.abs(b).max()):
            raise InfeasibleError("no point satisfies A x <= b")
    return T, basis, ncols, 2 * n + m


def _drop_artificials(T, basis, n_real):
    rows = []
    for i, col in enumerate(basis):
        if col >= n_real:
            cand = np.flatnonzero(np.abs(T[i, :n_real]) > TOL)
            if cand.size == 0:
                continue  # redundant row
            dummy = np.zeros(T.shape[1])
            _pivot(T, dummy, i, int(cand[0]))
            basis[i] = int(cand[0])
        rows.append(i)
    T = np.hstack([T[rows, :n_real], T[rows, -1:]])
    return T, [basis[i] for i in rows]


def is_feasible(A, b) -> bool:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    try:
        A, b = _normalise(A, b)
        if A.shape[0] == 0:
            return True
        _phase_one(A, b)
    except InfeasibleError:
        return False
    return True


def lp_solve(c, A, b) -> LPResult:
    """Maximise ``c.x`` subject to ``A x <= b``.

    Raises InfeasibleError or UnboundedError; the returned maximizer is feasible
    to within 1e-8 after row normalisation.
    """
    c = np.asarray(c, dtype=float).ravel()
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[0] != b.size:
        raise ValueError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    if A.shape[1] != c.size:
        raise ValueError(f"objective has {c.size} entries but A has {A.shape[1]} columns")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValueError("LP data must be finite")
    n = c.size
    A, b = _normalise(A, b)
    if A.shape[0] == 0:
        if np.any(c != 0):
            raise UnboundedError("no constraints and a nonzero objective")
        return LPResult(0.0, np.zeros(n))

    T, basis, ncols, n_real = _phase_one(A, b)
    T, basis = _drop_artificials(T, basis, n_real)

    obj = np.zeros(n_real + 1)
    obj[:n] = -c
    obj[n : 2 * n] = c
    for i, col in enumerate(basis):
        if obj[col] != 0.0:
            obj -= obj[col] * T[i]
    _run(T, obj, basis, n_real, max_iter=50 * (n_real + len(basis)) + 100)

    z = np.zeros(n_real)
    for i, col in enumerate(basis):
        z[col] = T[i, -1]
    x = z[:n] - z[n : 2 * n]
    return LPResult(float(c @ x), x)
