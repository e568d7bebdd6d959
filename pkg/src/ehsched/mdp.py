"""Average-cost MDP for the optimal transmission power schedule.

The decision state is (post-harvest battery, harvesting condition,
staleness rung of the remote covariance).  Transmitting at power ``a``
delivers with probability 1 - (1 - success_factor)^a; the stage cost is the
expected trace of the remote covariance after the attempt.  The staleness
ladder is truncated at ``n_trunc`` with a self-loop on the top rung, and
every solve reports how much stationary mass sits on that rung so the
truncation error stays visible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.sparse import csr_matrix

from .chains import closed_classes, stationary_distribution
from .channel import ChannelModel, drop_probability
from .energy import Condition, EnergyModel, battery_transition_row
from .kalman import SystemModel, build_ladder


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to converge."""


@dataclass(frozen=True)
class MdpState:
    """One decision state; ``flat_index`` is its position in solver arrays."""

    battery: int
    condition: Condition
    rung: int
    flat_index: int


class MdpProblem:
    """Finite truncation of the scheduling MDP.

    Parameters
    ----------
    system, channel, energy : the three physical models.
    n_trunc : staleness rungs kept in the state space; the top rung absorbs
        further drops.  The ladder is built one rung deeper so the
        truncation gap can be reported.
    """

    def __init__(self, system: SystemModel, channel: ChannelModel,
                 energy: EnergyModel, n_trunc: int = 30):
        if n_trunc < 1:
            raise ValueError(f"n_trunc must be >= 1, got {n_trunc}")
        self.system = system
        self.channel = channel
        self.energy = energy
        self.n_trunc = n_trunc
        self.ladder = build_ladder(system, depth=n_trunc + 1)
        self.capacity = energy.capacity

        self._n_rungs = n_trunc + 1
        self.states = []
        for battery in range(self.capacity + 1):
            for condition in (Condition.GOOD, Condition.BAD):
                for rung in range(self._n_rungs):
                    self.states.append(MdpState(
                        battery=battery, condition=condition, rung=rung,
                        flat_index=self.flat_index(battery, condition, rung)))
        self.states.sort(key=lambda s: s.flat_index)
        self.n_states = len(self.states)

        # next-battery rows indexed by (residual charge, next condition)
        self._battery_rows = np.empty((self.capacity + 1, 2, self.capacity + 1))
        for residual in range(self.capacity + 1):
            for cond in (Condition.GOOD, Condition.BAD):
                self._battery_rows[residual, int(cond)] = battery_transition_row(
                    residual, energy.harvest.row(cond), self.capacity)
        self._env = energy.chain.matrix

    def flat_index(self, battery: int, condition: Condition, rung: int) -> int:
        """Bijection (battery, condition, rung) -> {0, ..., n_states - 1}."""
        if not 0 <= battery <= self.capacity:
            raise ValueError(f"battery {battery} outside [0, {self.capacity}]")
        if not 0 <= rung <= self.n_trunc:
            raise ValueError(f"rung {rung} outside [0, {self.n_trunc}]")
        return (battery * 2 + int(condition)) * self._n_rungs + rung

    @property
    def initial_flat_index(self) -> int:
        """Start state for time-average limits: fresh estimate, configured battery."""
        return self.flat_index(self.energy.initial_battery,
                               self.energy.initial_condition, 0)

    def actions(self, state: MdpState) -> range:
        """Feasible powers: anything the post-harvest battery can pay for."""
        return range(state.battery + 1)

    def stage_cost(self, state: MdpState, action: int) -> float:
        """Expected remote covariance trace after transmitting at ``action``."""
        self._check_action(state, action)
        drop = drop_probability(self.channel, action)
        stale = self.ladder.traces[min(state.rung + 1, self.n_trunc)]
        return drop * stale + (1.0 - drop) * self.ladder.traces[0]

    def transition_kernel(self, state: MdpState, action: int) -> dict[int, float]:
        """Sparse next-state law as {flat_index: probability}."""
        self._check_action(state, action)
        drop = drop_probability(self.channel, action)
        residual = state.battery - action
        rung_up = min(state.rung + 1, self.n_trunc)
        out: dict[int, float] = {}
        for next_cond in (Condition.GOOD, Condition.BAD):
            env_p = self._env[int(state.condition), int(next_cond)]
            if env_p == 0.0:
                continue
            rows = self._battery_rows[residual, int(next_cond)]
            for next_batt, batt_p in enumerate(rows):
                if batt_p == 0.0:
                    continue
                base = env_p * batt_p
                if drop > 0.0:
                    idx = self.flat_index(next_batt, next_cond, rung_up)
                    out[idx] = out.get(idx, 0.0) + drop * base
                if drop < 1.0:
                    idx = self.flat_index(next_batt, next_cond, 0)
                    out[idx] = out.get(idx, 0.0) + (1.0 - drop) * base
        return out

    def _check_action(self, state: MdpState, action: int) -> None:
        if action not in self.actions(state):
            raise ValueError(
                f"action {action} infeasible at (battery={state.battery}, "
                f"condition={state.condition.name}, rung={state.rung})")

    # --- assembled arrays for the vectorized solver -------------------------

    def _action_table(self):
        """Rows (state, action) in flat-state order, actions ascending."""
        rows = []
        for state in self.states:
            for action in self.actions(state):
                rows.append((state, action))
        return rows

    def _assemble(self):
        rows = self._action_table()
        costs = np.array([self.stage_cost(s, a) for s, a in rows])
        data, col, ptr = [], [], [0]
        for state, action in rows:
            kernel = self.transition_kernel(state, action)
            col.extend(kernel.keys())
            data.extend(kernel.values())
            ptr.append(len(col))
        trans = csr_matrix(
            (np.array(data), np.array(col), np.array(ptr)),
            shape=(len(rows), self.n_states))
        starts = np.cumsum([0] + [state.battery + 1 for state in self.states])[:-1]
        return rows, costs, trans, starts


@dataclass(frozen=True)
class LookupPolicy:
    """Deterministic stationary policy stored as a flat action table.

    Rungs beyond the truncation depth are clamped to the top rung for
    lookups, mirroring the solver's self-loop.
    """

    table: np.ndarray
    capacity: int
    n_trunc: int
    kind: str = "lookup"

    def __post_init__(self):
        table = np.asarray(self.table, dtype=int)
        expected = (self.capacity + 1) * 2 * (self.n_trunc + 1)
        if table.shape != (expected,):
            raise ValueError(f"table must have shape ({expected},), got {table.shape}")
        batteries = np.arange(expected) // (2 * (self.n_trunc + 1))
        if np.any(table < 0) or np.any(table > batteries):
            bad = int(np.flatnonzero((table < 0) | (table > batteries))[0])
            raise ValueError(
                f"infeasible action {table[bad]} at flat state {bad} "
                f"(battery {batteries[bad]})")
        object.__setattr__(self, "table", table)

    @property
    def rung_cap(self) -> int:
        return self.n_trunc

    def action(self, battery: int, condition: Condition, rung: int, harvested=None) -> int:
        return int(self.table[self._flat(battery, int(condition), min(rung, self.n_trunc))])

    def batch_action(self, battery, condition, rung, harvested=None) -> np.ndarray:
        rung = np.minimum(rung, self.n_trunc)
        return self.table[self._flat(np.asarray(battery), np.asarray(condition), rung)]

    def _flat(self, battery, condition, rung):
        return (battery * 2 + condition) * (self.n_trunc + 1) + rung


@dataclass(frozen=True)
class SolveResult:
    """Output of relative value iteration."""

    avg_cost: float
    relative_values: np.ndarray
    policy: LookupPolicy
    iterations: int
    residual: float
    top_rung_mass: float
    truncation_gap_bound: float


def _policy_table(problem: MdpProblem, policy) -> np.ndarray:
    """Actions of ``policy`` over flat states, feasibility-checked."""
    if getattr(policy, "kind", None) == "greedy":
        raise TypeError(
            "greedy schedule depends on the per-step harvest draw and has no "
            "representation on the decision states; evaluate it by simulation")
    table = np.empty(problem.n_states, dtype=int)
    for state in problem.states:
        a = int(policy.action(state.battery, state.condition, state.rung))
        if a not in problem.actions(state):
            raise ValueError(
                f"policy action {a} infeasible at (battery={state.battery}, "
                f"condition={state.condition.name}, rung={state.rung})")
        table[state.flat_index] = a
    return table


def _induced_chain(problem: MdpProblem, table: np.ndarray):
    p = np.zeros((problem.n_states, problem.n_states))
    costs = np.empty(problem.n_states)
    for state in problem.states:
        a = int(table[state.flat_index])
        costs[state.flat_index] = problem.stage_cost(state, a)
        for idx, prob in problem.transition_kernel(state, a).items():
            p[state.flat_index, idx] = prob
    return p, costs


def policy_stationary(problem: MdpProblem, policy) -> np.ndarray:
    """Stationary distribution of the chain induced by ``policy``.

    Reducible chains resolve to the time-average limit from the problem's
    initial state; a warning is raised since average-cost optimality
    arguments assume a single recurrent class.
    """
    table = _policy_table(problem, policy)
    p, _ = _induced_chain(problem, table)
    if len(closed_classes(p)) > 1:
        warnings.warn(
            "induced chain has multiple closed recurrent classes; average "
            "cost depends on the initial state", RuntimeWarning, stacklevel=2)
    return stationary_distribution(p, init=problem.initial_flat_index)


def policy_evaluate_exact(problem: MdpProblem, policy) -> float:
    """Long-run average cost of ``policy`` from the induced-chain stationary law."""
    table = _policy_table(problem, policy)
    p, costs = _induced_chain(problem, table)
    if len(closed_classes(p)) > 1:
        warnings.warn(
            "induced chain has multiple closed recurrent classes; average "
            "cost depends on the initial state", RuntimeWarning, stacklevel=2)
    q = stationary_distribution(p, init=problem.initial_flat_index)
    return float(q @ costs)


def relative_value_iteration(
    problem: MdpProblem,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> SolveResult:
    """Solve the average-cost problem by relative value iteration.

    The relative value vector is pinned to zero at flat state 0 each sweep
    and the iteration stops when the span of successive differences falls
    below ``tol``; the optimal average cost is then bracketed within that
    span.  If the span stalls for 100 sweeps (periodic structure), later
    sweeps are damped halfway to restore convergence.
    """
    _, costs, trans, starts = problem._assemble()
    values = np.zeros(problem.n_states)
    damping = 0.0
    best_span = np.inf
    stall = 0
    for sweep in range(1, max_iter + 1):
        backed_up = costs + trans @ values
        swept = np.minimum.reduceat(backed_up, starts)
        diff = swept - values
        span = float(diff.max() - diff.min())
        avg_cost = 0.5 * (diff.max() + diff.min())
        new_values = swept - swept[0]
        if damping > 0.0:
            new_values = (1.0 - damping) * new_values + damping * values
        if span <= tol:
            values = new_values
            break
        if span < best_span * (1.0 - 1e-12):
            best_span = span
            stall = 0
        else:
            stall += 1
            if stall >= 100 and damping == 0.0:
                damping = 0.5
        values = new_values
    else:
        raise SolverError(
            f"relative value iteration did not reach span {tol:.1e} in "
            f"{max_iter} sweeps (last span {span:.3e})")

    # greedy extraction; reduceat minima hit the smallest action first
    backed_up = costs + trans @ values
    group_min = np.minimum.reduceat(backed_up, starts)
    table = np.empty(problem.n_states, dtype=int)
    for i, state in enumerate(problem.states):
        lo = starts[i]
        hi = lo + state.battery + 1
        table[state.flat_index] = int(np.argmin(backed_up[lo:hi]))
        assert backed_up[lo + table[state.flat_index]] == group_min[i]
    policy = LookupPolicy(table=table, capacity=problem.capacity, n_trunc=problem.n_trunc)

    top_mass = _top_rung_mass(problem, policy)
    gap = float(problem.ladder.traces[problem.n_trunc + 1]
                - problem.ladder.traces[problem.n_trunc])
    return SolveResult(
        avg_cost=float(avg_cost),
        relative_values=values,
        policy=policy,
        iterations=sweep,
        residual=span,
        top_rung_mass=top_mass,
        truncation_gap_bound=top_mass * gap,
    )


def _top_rung_mass(problem: MdpProblem, policy) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = policy_stationary(problem, policy)
    top = [s.flat_index for s in problem.states if s.rung == problem.n_trunc]
    return float(q[top].sum())


def brute_force_average_cost(problem: MdpProblem, limit: int = 100_000):
    """Exhaustive minimum over deterministic stationary policies.

    Only viable for toy instances; refuses to enumerate more than ``limit``
    policies.  Returns (best average cost, best policy).
    """
    count = 1
    for state in problem.states:
        count *= state.battery + 1
        if count > limit:
            raise ValueError(
                f"policy space exceeds {limit} (at least {count}); "
                "brute force is only for toy instances")
    best_cost, best_table = np.inf, None
    for actions in product(*(problem.actions(s) for s in problem.states)):
        table = np.array(actions, dtype=int)
        p, costs = _induced_chain(problem, table)
        q = stationary_distribution(p, init=problem.initial_flat_index)
        cost = float(q @ costs)
        if cost < best_cost - 1e-15:
            best_cost, best_table = cost, table
    policy = LookupPolicy(table=best_table, capacity=problem.capacity,
                          n_trunc=problem.n_trunc)
    return best_cost, policy
