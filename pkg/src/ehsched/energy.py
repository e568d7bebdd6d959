"""Harvesting environment, battery bookkeeping, and their sampling rules.

The ambient energy source switches between a good and a bad condition as a
two-state Markov chain; the sensor harvests a random number of quanta each
step from a condition-dependent distribution, stores them in a finite
battery, and spends an integer amount on transmission.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

PROB_TOL = 1e-12


class Condition(IntEnum):
    """Harvesting condition index; doubles as the row index everywhere."""

    GOOD = 0
    BAD = 1


def _check_prob(p: float, label: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{label} must lie in [0, 1], got {p!r}")
    return p


@dataclass(frozen=True)
class EnvironmentChain:
    """Two-state condition chain; rows are (from GOOD, from BAD)."""

    p_gg: float
    p_gb: float
    p_bg: float
    p_bb: float

    def __post_init__(self):
        for name in ("p_gg", "p_gb", "p_bg", "p_bb"):
            _check_prob(getattr(self, name), name)
        if abs(self.p_gg + self.p_gb - 1.0) > PROB_TOL:
            raise ValueError(f"p_gg + p_gb must equal 1, got {self.p_gg + self.p_gb!r}")
        if abs(self.p_bg + self.p_bb - 1.0) > PROB_TOL:
            raise ValueError(f"p_bg + p_bb must equal 1, got {self.p_bg + self.p_bb!r}")

    @classmethod
    def from_stay_rates(cls, p_gg: float, p_bg: float) -> "EnvironmentChain":
        """Build from the GOOD-row stay rate and the BAD-row recovery rate."""
        _check_prob(p_gg, "p_gg")
        _check_prob(p_bg, "p_bg")
        return cls(p_gg=p_gg, p_gb=1.0 - p_gg, p_bg=p_bg, p_bb=1.0 - p_bg)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.p_gg, self.p_gb], [self.p_bg, self.p_bb]])


@dataclass(frozen=True)
class HarvestDistribution:
    """Distributions of harvested quanta per step, one row per condition.

    Support is exactly {0, ..., capacity}; anything longer cannot be stored
    and is rejected rather than silently clipped.
    """

    good: np.ndarray
    bad: np.ndarray

    def __post_init__(self):
        good = np.asarray(self.good, dtype=float)
        bad = np.asarray(self.bad, dtype=float)
        for name, vec in (("good", good), ("bad", bad)):
            if vec.ndim != 1 or vec.size == 0:
                raise ValueError(f"{name} must be a nonempty vector")
            if vec.min() < 0.0:
                raise ValueError(f"{name} has a negative entry: {vec.min()!r}")
            if abs(vec.sum() - 1.0) > PROB_TOL:
                raise ValueError(f"{name} must sum to 1, got {vec.sum()!r}")
        if good.shape != bad.shape:
            raise ValueError(
                f"good and bad supports differ: {good.shape} vs {bad.shape}"
            )
        object.__setattr__(self, "good", good)
        object.__setattr__(self, "bad", bad)

    @property
    def capacity(self) -> int:
        return self.good.size - 1

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([self.good, self.bad])

    def row(self, condition: Condition) -> np.ndarray:
        return self.good if condition == Condition.GOOD else self.bad


@dataclass(frozen=True)
class EnergyModel:
    """Environment chain, harvest law, and battery limits in one bundle."""

    chain: EnvironmentChain
    harvest: HarvestDistribution
    capacity: int
    initial_battery: int = 0
    initial_condition: Condition = Condition.GOOD

    def __post_init__(self):
        if self.capacity != self.harvest.capacity:
            raise ValueError(
                f"capacity {self.capacity} does not match harvest support "
                f"{{0..{self.harvest.capacity}}}"
            )
        if not 0 <= self.initial_battery <= self.capacity:
            raise ValueError(
                f"initial_battery must lie in [0, {self.capacity}], "
                f"got {self.initial_battery}"
            )


def env_step(condition: Condition, chain: EnvironmentChain, rng: np.random.Generator) -> Condition:
    """Advance the condition chain one step, consuming one uniform."""
    to_good = chain.p_gg if condition == Condition.GOOD else chain.p_bg
    return Condition.GOOD if rng.random() < to_good else Condition.BAD


def env_stationary(chain: EnvironmentChain, initial: Condition = Condition.GOOD) -> np.ndarray:
    """Long-run condition distribution.

    For an irreducible chain this is the usual balance solution; with an
    absorbing condition it is the time-average limit started from
    ``initial``.
    """
    if chain.p_gb > 0.0 and chain.p_bg > 0.0:
        total = chain.p_gb + chain.p_bg
        return np.array([chain.p_bg / total, chain.p_gb / total])
    if chain.p_gb == 0.0 and chain.p_bg == 0.0:
        out = np.zeros(2)
        out[int(initial)] = 1.0
        return out
    # exactly one condition is absorbing and every path ends there
    absorbing = Condition.GOOD if chain.p_gb == 0.0 else Condition.BAD
    out = np.zeros(2)
    out[int(absorbing)] = 1.0
    return out


def harvest_sample(
    condition: Condition, harvest: HarvestDistribution, rng: np.random.Generator
) -> int:
    """Draw harvested quanta by inverting the condition's CDF on one uniform."""
    cdf = np.cumsum(harvest.row(condition))
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def battery_after_harvest(battery: int, harvested: int, capacity: int) -> int:
    """Store the harvest, spilling anything beyond capacity."""
    if battery < 0 or battery > capacity:
        raise ValueError(f"battery must lie in [0, {capacity}], got {battery}")
    if harvested < 0:
        raise ValueError(f"harvested must be >= 0, got {harvested}")
    return min(battery + harvested, capacity)


def battery_next(after_harvest: int, power: int) -> int:
    """Spend transmission power from the post-harvest level."""
    if power < 0 or power > after_harvest:
        raise ValueError(
            f"power must lie in [0, {after_harvest}] (post-harvest level), got {power}"
        )
    return after_harvest - power


def battery_transition_row(
    residual: int, harvest_probs: np.ndarray, capacity: int
) -> np.ndarray:
    """Distribution of the next post-harvest level from a residual charge.

    Walks the harvest support through the two battery operations, so
    saturation mass lands on the capacity cell by construction.
    """
    row = np.zeros(capacity + 1)
    for quanta, p in enumerate(harvest_probs):
        row[battery_after_harvest(residual, quanta, capacity)] += p
    return row
