"""Threshold transmission schedules and their closed-form chain analysis.

A threshold schedule spends min(post-harvest battery, cap) where the cap
depends only on the harvesting condition.  Because the power choice ignores
the staleness rung, the pair (post-harvest battery, condition) is itself a
Markov chain; this module builds its transition matrix from the battery
primitives, solves for the stationary law, and pushes that law through the
schedule to get the long-run power distribution.

Index convention for the pair chain: state (battery b, condition e) sits at
row 2*b + e with conditions ordered (GOOD, BAD), zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .energy import Condition, EnergyModel, battery_next, battery_transition_row
from .mdp import LookupPolicy, MdpProblem, policy_evaluate_exact


@dataclass(frozen=True)
class ThresholdPolicy:
    """Condition-dependent power caps; spends the cap whenever it can."""

    cap_good: int
    cap_bad: int
    kind: str = "threshold"

    def __post_init__(self):
        if self.cap_good < 0 or self.cap_bad < 0:
            raise ValueError(
                f"caps must be >= 0, got ({self.cap_good}, {self.cap_bad})")

    def cap(self, condition: Condition) -> int:
        return self.cap_good if condition == Condition.GOOD else self.cap_bad

    def action(self, battery: int, condition: Condition, rung=None, harvested=None) -> int:
        return min(battery, self.cap(condition))

    def batch_action(self, battery, condition, rung=None, harvested=None) -> np.ndarray:
        caps = np.array([self.cap_good, self.cap_bad])
        return np.minimum(np.asarray(battery), caps[np.asarray(condition)])

    def as_lookup(self, problem: MdpProblem) -> LookupPolicy:
        """Lift onto the full decision-state table of ``problem``."""
        table = np.empty(problem.n_states, dtype=int)
        for state in problem.states:
            table[state.flat_index] = self.action(state.battery, state.condition)
        return LookupPolicy(table=table, capacity=problem.capacity,
                            n_trunc=problem.n_trunc)


def pair_index(battery: int, condition: Condition) -> int:
    """Row index of (battery, condition) in the pair chain."""
    if battery < 0:
        raise ValueError(f"battery must be >= 0, got {battery}")
    return 2 * battery + int(condition)


def index_pair(index: int) -> tuple[int, Condition]:
    if index < 0:
        raise ValueError(f"index must be >= 0, got {index}")
    return index // 2, Condition(index % 2)


def build_transition_matrix(policy: ThresholdPolicy, energy: EnergyModel) -> np.ndarray:
    """Transition matrix of (post-harvest battery, condition) under ``policy``.

    Built by stepping the battery primitives directly: spend the capped
    power, then convolve the residual with next condition's harvest row.
    Rows follow the ``pair_index`` convention and sum to one.
    """
    capacity = energy.capacity
    n = 2 * (capacity + 1)
    env = energy.chain.matrix
    out = np.zeros((n, n))
    for battery in range(capacity + 1):
        for cond in (Condition.GOOD, Condition.BAD):
            residual = battery_next(battery, policy.action(battery, cond))
            row = out[pair_index(battery, cond)]
            for next_cond in (Condition.GOOD, Condition.BAD):
                batt_row = battery_transition_row(
                    residual, energy.harvest.row(next_cond), capacity)
                env_p = env[int(cond), int(next_cond)]
                for next_batt, p in enumerate(batt_row):
                    row[pair_index(next_batt, next_cond)] += env_p * p
    return out


def power_distribution(stationary: np.ndarray, policy: ThresholdPolicy) -> np.ndarray:
    """Push the pair-chain stationary law through the schedule.

    Returns the long-run distribution of the spent power on
    {0, ..., capacity}.
    """
    q = np.asarray(stationary, dtype=float)
    if q.ndim != 1 or q.size % 2:
        raise ValueError(f"stationary vector must pair up conditions, got shape {q.shape}")
    capacity = q.size // 2 - 1
    out = np.zeros(capacity + 1)
    for idx, mass in enumerate(q):
        battery, cond = index_pair(idx)
        out[policy.action(battery, cond)] += mass
    return out


def threshold_grid_search(problem: MdpProblem):
    """Best threshold pair by exact evaluation over all caps.

    Scans the (capacity + 1)^2 cap pairs, lifting each schedule onto the
    decision states and scoring it through the induced-chain stationary
    law.  Returns (policy, average cost); ties keep the lexicographically
    smallest pair.
    """
    best_cost, best_policy = np.inf, None
    for cap_good, cap_bad in product(range(problem.capacity + 1), repeat=2):
        policy = ThresholdPolicy(cap_good=cap_good, cap_bad=cap_bad)
        cost = policy_evaluate_exact(problem, policy.as_lookup(problem))
        if cost < best_cost - 1e-15:
            best_cost, best_policy = cost, policy
    return best_policy, float(best_cost)
