"""Kalman filtering primitives for the intermittent-observation estimator.

The local sensor runs a standard Kalman filter; the remote estimator only
sees the filtered estimate when a packet arrives.  Everything downstream
(MDP stage costs, the simulation cost ledger) is driven by two matrix maps:
the open-loop covariance update and the measurement-update reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Eigenvalues may dip slightly negative through round-off; accept and clip
# anything above -PSD_SLACK * (1 + ||X||_F), reject worse.
PSD_SLACK = 1e-9

# Rank decisions (observability / controllability) count singular values
# above RANK_RTOL * sigma_max.
RANK_RTOL = 1e-8


def _project_psd(x: np.ndarray, label: str = "matrix") -> np.ndarray:
    """Symmetrize and clip tiny negative eigenvalues; reject real ones."""
    sym = 0.5 * (x + x.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    floor = -PSD_SLACK * (1.0 + np.linalg.norm(sym, "fro"))
    if eigvals.min() < floor:
        raise ValueError(
            f"{label} is not positive semidefinite "
            f"(min eigenvalue {eigvals.min():.3e}, tolerance {floor:.3e})"
        )
    return (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T


def _as_square(x, n: int | None, label: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{label} must be square, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{label} must be {n}x{n}, got shape {arr.shape}")
    return arr


def _psd_sqrt(x: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(0.5 * (x + x.T))
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def _rank(mat: np.ndarray) -> int:
    sing = np.linalg.svd(mat, compute_uv=False)
    if sing.size == 0 or sing[0] == 0.0:
        return 0
    return int(np.sum(sing > RANK_RTOL * sing[0]))


@dataclass(frozen=True)
class SystemModel:
    """Linear plant x' = A x + w, y = C x + v with known noise covariances.

    Parameters
    ----------
    A : (n, n) state transition matrix.
    C : (p, n) measurement matrix.
    Q : (n, n) process noise covariance, symmetric PSD.
    R : (p, p) measurement noise covariance, symmetric PD.
    initial_cov : (n, n) prior covariance of the initial state, symmetric PSD.
    check_structural : when True (default), reject models that are not
        observable through C or not controllable through the process noise.
        Degenerate classroom cases (e.g. Q = 0) can opt out.
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    initial_cov: np.ndarray
    check_structural: bool = field(default=True, compare=False)

    def __post_init__(self):
        a = _as_square(self.A, None, "A")
        n = a.shape[0]
        c = np.atleast_2d(np.asarray(self.C, dtype=float))
        if c.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got shape {c.shape}")
        q = _project_psd(_as_square(self.Q, n, "Q"), "Q")
        r = _project_psd(_as_square(self.R, c.shape[0], "R"), "R")
        if np.linalg.eigvalsh(r).min() <= 0.0:
            raise ValueError("R must be positive definite")
        p0 = _project_psd(_as_square(self.initial_cov, n, "initial_cov"), "initial_cov")
        if self.check_structural:
            obs = np.vstack([c @ np.linalg.matrix_power(a, k) for k in range(n)])
            if _rank(obs) < n:
                raise ValueError("model is not observable: rank deficiency in [C; CA; ...]")
            qroot = _psd_sqrt(q)
            ctrl = np.hstack([np.linalg.matrix_power(a, k) @ qroot for k in range(n)])
            if _rank(ctrl) < n:
                raise ValueError(
                    "model is not controllable through the process noise "
                    "(rank deficiency in [Q^1/2, A Q^1/2, ...])"
                )
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "R", r)
        object.__setattr__(self, "initial_cov", p0)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]


def lyapunov_step(cov: np.ndarray, model: SystemModel) -> np.ndarray:
    """One open-loop covariance update: A X A' + Q."""
    x = _project_psd(_as_square(cov, model.state_dim, "cov"), "cov")
    return _project_psd(model.A @ x @ model.A.T + model.Q)


def riccati_reduce(cov: np.ndarray, model: SystemModel) -> np.ndarray:
    """Measurement-update reduction: X - X C' (C X C' + R)^-1 C X."""
    x = _project_psd(_as_square(cov, model.state_dim, "cov"), "cov")
    cx = model.C @ x
    innov = model.C @ x @ model.C.T + model.R
    return _project_psd(x - cx.T @ np.linalg.solve(innov, cx))


def steady_state_covariance(
    model: SystemModel, tol: float = 1e-12, max_iter: int = 10**6
) -> np.ndarray:
    """Fixed point of the composed update, iterated from the initial covariance.

    Returns the steady-state filtered covariance the local sensor settles
    into; raises RuntimeError if the iteration has not converged within
    ``max_iter`` sweeps (Frobenius norm of successive differences vs ``tol``).
    """
    x = model.initial_cov
    for _ in range(max_iter):
        x_next = riccati_reduce(lyapunov_step(x, model), model)
        if np.linalg.norm(x_next - x, "fro") <= tol:
            return x_next
        x = x_next
    raise RuntimeError(
        f"steady-state covariance iteration did not converge in {max_iter} steps"
    )


@dataclass(frozen=True)
class CovarianceLadder:
    """Covariances reachable by consecutive packet drops after steady state.

    ``rungs[t]`` is the steady-state covariance pushed through ``t`` open-loop
    updates; ``traces[t]`` caches its trace.  Traces must increase strictly
    with the rung index, which pins down how stale an estimate is from its
    trace alone.
    """

    rungs: tuple
    traces: np.ndarray

    def __post_init__(self):
        if len(self.rungs) != len(self.traces):
            raise ValueError("rungs and traces length mismatch")
        diffs = np.diff(self.traces)
        if len(diffs) and diffs.min() <= 0.0:
            worst = int(np.argmin(diffs))
            raise ValueError(
                f"ladder traces must increase strictly; rung {worst} -> {worst + 1} "
                f"changes by {diffs.min():.3e}"
            )

    @property
    def depth(self) -> int:
        return len(self.rungs) - 1

    def __len__(self) -> int:
        return len(self.rungs)


def build_ladder(model: SystemModel, depth: int, steady: np.ndarray | None = None) -> CovarianceLadder:
    """Build the drop ladder up to ``depth`` open-loop updates."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if steady is None:
        steady = steady_state_covariance(model)
    rungs = [steady]
    for _ in range(depth):
        rungs.append(lyapunov_step(rungs[-1], model))
    traces = np.array([float(np.trace(r)) for r in rungs])
    return CovarianceLadder(rungs=tuple(rungs), traces=traces)


def local_filter_step(
    prev_estimate: np.ndarray,
    prev_cov: np.ndarray,
    measurement: np.ndarray,
    model: SystemModel,
):
    """One full filter step at the sensor.

    Runs the prediction, gain, and correction equations and returns the
    updated estimate and covariance.  The covariance leg equals the composed
    operator ``riccati_reduce(lyapunov_step(prev_cov))`` by construction.
    """
    xhat = np.asarray(prev_estimate, dtype=float).reshape(model.state_dim)
    y = np.asarray(measurement, dtype=float).reshape(model.C.shape[0])
    x_pred = model.A @ xhat
    p_pred = lyapunov_step(prev_cov, model)
    innov_cov = model.C @ p_pred @ model.C.T + model.R
    gain = np.linalg.solve(innov_cov, model.C @ p_pred).T
    estimate = x_pred + gain @ (y - model.C @ x_pred)
    cov = _project_psd((np.eye(model.state_dim) - gain @ model.C) @ p_pred)
    return estimate, cov


def remote_update(
    prev_cov: np.ndarray, arrival: int, model: SystemModel, steady: np.ndarray
) -> np.ndarray:
    """Remote-side covariance update: reset on arrival, open-loop on a drop."""
    if arrival not in (0, 1):
        raise ValueError(f"arrival must be 0 or 1, got {arrival!r}")
    if arrival:
        return _project_psd(_as_square(steady, model.state_dim, "steady"), "steady")
    return lyapunov_step(prev_cov, model)
