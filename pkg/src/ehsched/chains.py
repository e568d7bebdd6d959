"""Stationary analysis of finite Markov chains.

Used by both the threshold-schedule analysis and exact policy evaluation.
Reducible chains are handled by decomposing into closed recurrent classes:
the returned vector is the time-average limit of the chain started from
``init`` (a state index or a distribution), which weights each closed
class by its absorption probability.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

ROW_SUM_TOL = 1e-9


def _check_stochastic(matrix: np.ndarray) -> np.ndarray:
    p = np.asarray(matrix, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {p.shape}")
    if p.min() < -ROW_SUM_TOL:
        raise ValueError(f"transition matrix has a negative entry: {p.min()!r}")
    row_err = np.abs(p.sum(axis=1) - 1.0).max()
    if row_err > ROW_SUM_TOL:
        raise ValueError(f"transition matrix rows must sum to 1 (max error {row_err:.3e})")
    return p


def closed_classes(matrix: np.ndarray) -> list[np.ndarray]:
    """Index sets of the closed recurrent classes, in first-state order."""
    p = _check_stochastic(matrix)
    n = p.shape[0]
    n_comp, labels = connected_components(csr_matrix(p > 0.0), connection="strong")
    closed = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        outside = np.ones(n, dtype=bool)
        outside[members] = False
        if p[np.ix_(members, outside)].sum() == 0.0:
            closed.append(members)
    closed.sort(key=lambda idx: idx[0])
    return closed


def _class_stationary(p_sub: np.ndarray) -> np.ndarray:
    """Balance solution q = q P on one irreducible class."""
    n = p_sub.shape[0]
    if n == 1:
        return np.ones(1)
    a = p_sub.T - np.eye(n)
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        q = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        q = np.linalg.lstsq(a, rhs, rcond=None)[0]
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def stationary_distribution(matrix, init: int | np.ndarray | None = None) -> np.ndarray:
    """Time-average limit distribution of the chain started from ``init``.

    ``init`` may be a state index, a probability vector, or None (state 0).
    For an irreducible chain the start is irrelevant and the usual
    stationary vector is returned.
    """
    p = _check_stochastic(matrix)
    n = p.shape[0]
    if init is None:
        start = np.zeros(n)
        start[0] = 1.0
    elif np.isscalar(init) or isinstance(init, (int, np.integer)):
        idx = int(init)
        if not 0 <= idx < n:
            raise ValueError(f"init state {idx} outside [0, {n - 1}]")
        start = np.zeros(n)
        start[idx] = 1.0
    else:
        start = np.asarray(init, dtype=float)
        if start.shape != (n,) or start.min() < 0.0 or abs(start.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("init must be a state index or a distribution over states")

    classes = closed_classes(p)
    if len(classes) == 1 and classes[0].size == n:
        return _class_stationary(p)

    in_closed = np.zeros(n, dtype=bool)
    for members in classes:
        in_closed[members] = True
    transient = np.flatnonzero(~in_closed)

    # absorption probability into each closed class
    weights = np.array([start[members].sum() for members in classes])
    if transient.size:
        p_tt = p[np.ix_(transient, transient)]
        rhs = np.column_stack(
            [p[np.ix_(transient, members)].sum(axis=1) for members in classes]
        )
        absorb = np.linalg.solve(np.eye(transient.size) - p_tt, rhs)
        weights = weights + start[transient] @ absorb

    out = np.zeros(n)
    for w, members in zip(weights, classes):
        if w > 0.0:
            out[members] = w * _class_stationary(p[np.ix_(members, members)])
    return out
