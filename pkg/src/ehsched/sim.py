"""Seeded Monte Carlo engine for the closed estimation loop.

Every replication owns three random substreams (environment, harvest,
channel) derived from the master seed and the replication index, and each
substream consumes exactly one uniform per step.  Policies that never look
at a stream therefore leave it untouched for the next policy: simulating
two schedules with the same master seed reuses identical randomness, which
is what makes small cost differences resolvable.

The remote covariance is never formed during simulation; its trace is read
off the staleness ladder, extended lazily as deep as the worst drop run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel
from .energy import Condition, EnergyModel
from .kalman import SystemModel, lyapunov_step, steady_state_covariance

# substream labels inside one replication
_STREAM_ENV = 0
_STREAM_HARVEST = 1
_STREAM_CHANNEL = 2

_CHUNK = 4096


def replication_streams(master_seed: int, replication: int):
    """The three per-replication generators, in (env, harvest, channel) order.

    Substream (replication, role) is spawned as
    ``SeedSequence(master_seed, spawn_key=(replication, role))``, so any
    replication can be regenerated on its own and streams never overlap.
    """
    return tuple(
        np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=master_seed, spawn_key=(replication, role))))
        for role in (_STREAM_ENV, _STREAM_HARVEST, _STREAM_CHANNEL))


@dataclass(frozen=True)
class SimConfig:
    """Horizon, replication count, seeding, and recording cadence.

    ``initial_battery`` / ``initial_condition`` override the energy model's
    starting point when given.
    """

    horizon: int = 10_000
    replications: int = 1000
    master_seed: int = 12345
    record_stride: int = 1
    initial_battery: int | None = None
    initial_condition: Condition | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")


@dataclass
class SimTrace:
    """Simulation output for one policy.

    ``record_steps`` lists the recorded step indices; ``mean_running_cost``
    and ``stderr_running_cost`` average the running cost J_k over
    replications at those steps.  The ``sample_*`` arrays log replication 0
    step by step for inspection.  ``final_costs`` holds each replication's
    horizon average, and ``rung_overflow_rate`` is the fraction of
    (step, replication) pairs whose staleness exceeded the policy's rung
    cap (0.0 when the policy has none).
    """

    label: str
    record_steps: np.ndarray
    mean_running_cost: np.ndarray
    stderr_running_cost: np.ndarray
    final_costs: np.ndarray
    sample_condition: np.ndarray
    sample_harvest: np.ndarray
    sample_battery: np.ndarray
    sample_power: np.ndarray
    sample_arrival: np.ndarray
    sample_cov_trace: np.ndarray
    sample_running_cost: np.ndarray
    rung_overflow_rate: float = 0.0

    @property
    def final_mean(self) -> float:
        return float(self.final_costs.mean())

    @property
    def final_stderr(self) -> float:
        if self.final_costs.size < 2:
            return 0.0
        return float(self.final_costs.std(ddof=1) / np.sqrt(self.final_costs.size))


@dataclass(frozen=True)
class GreedyPolicy:
    """Spend exactly what was harvested this step; the battery never fills."""

    kind: str = "greedy"

    def action(self, battery: int, condition: Condition, rung=None, harvested=None) -> int:
        if harvested is None:
            raise TypeError("greedy schedule needs the per-step harvest draw")
        return int(harvested)

    def batch_action(self, battery, condition, rung=None, harvested=None) -> np.ndarray:
        if harvested is None:
            raise TypeError("greedy schedule needs the per-step harvest draw")
        return np.asarray(harvested)


def greedy_policy() -> GreedyPolicy:
    return GreedyPolicy()


class _TraceLadder:
    """Lazily extended trace table of the staleness ladder."""

    def __init__(self, system: SystemModel, steady: np.ndarray):
        self._system = system
        self._top = steady
        self._traces = [float(np.trace(steady))]

    def lookup(self, rungs: np.ndarray) -> np.ndarray:
        need = int(rungs.max())
        while need >= len(self._traces):
            self._top = lyapunov_step(self._top, self._system)
            self._traces.append(float(np.trace(self._top)))
        return np.asarray(self._traces)[rungs]


def _uniform_block(generators, out: np.ndarray, width: int) -> None:
    for rep, gen in enumerate(generators):
        out[rep, :width] = gen.random(width)


def simulate(policy, system: SystemModel, channel: ChannelModel,
             energy: EnergyModel, config: SimConfig, label: str | None = None) -> SimTrace:
    """Run the closed loop under ``policy`` and aggregate running costs.

    All replications advance in lockstep (vectorized across the replication
    axis); randomness is reproducible bit for bit from the master seed.
    Raises RuntimeError if the policy ever overdraws the battery.
    """
    horizon, reps = config.horizon, config.replications
    capacity = energy.capacity
    chain = energy.chain

    steady = steady_state_covariance(system)
    traces = _TraceLadder(system, steady)

    start_battery = (energy.initial_battery if config.initial_battery is None
                     else config.initial_battery)
    if not 0 <= start_battery <= capacity:
        raise ValueError(f"initial battery {start_battery} outside [0, {capacity}]")
    start_cond = (energy.initial_condition if config.initial_condition is None
                  else config.initial_condition)

    env_gens, harvest_gens, channel_gens = zip(
        *(replication_streams(config.master_seed, rep) for rep in range(reps)))
    u_env = np.empty((reps, _CHUNK))
    u_harvest = np.empty((reps, _CHUNK))
    u_channel = np.empty((reps, _CHUNK))

    # inverse-CDF tables: harvest r = #{cut points <= u}, next condition GOOD iff u < stay
    harvest_cuts = np.cumsum(energy.harvest.matrix, axis=1)[:, :-1]
    to_good = np.array([chain.p_gg, chain.p_bg])
    drop_base = 1.0 - channel.success_factor
    rung_cap = getattr(policy, "rung_cap", None)

    cond = np.full(reps, int(start_cond), dtype=np.int64)
    battery = np.full(reps, start_battery, dtype=np.int64)
    rung = np.zeros(reps, dtype=np.int64)
    cost_sum = np.zeros(reps)
    overflow = 0

    recorded_k, mean_curve, stderr_curve = [], [], []
    sample = {name: [] for name in
              ("condition", "harvest", "battery", "power", "arrival", "cov_trace", "running")}

    step = 0
    while step < horizon:
        width = min(_CHUNK, horizon - step)
        _uniform_block(env_gens, u_env, width)
        _uniform_block(harvest_gens, u_harvest, width)
        _uniform_block(channel_gens, u_channel, width)

        for j in range(width):
            step += 1
            harvested = (u_harvest[:, j, None] >= harvest_cuts[cond]).sum(axis=1)
            stored = np.minimum(battery + harvested, capacity)
            power = np.asarray(policy.batch_action(stored, cond, rung, harvested),
                               dtype=np.int64)
            bad = (power < 0) | (power > stored)
            if bad.any():
                rep = int(np.flatnonzero(bad)[0])
                raise RuntimeError(
                    f"policy overdraws battery at step {step}, replication {rep}: "
                    f"power {power[rep]} with (battery={stored[rep]}, "
                    f"condition={Condition(cond[rep]).name}, rung={rung[rep]})")
            if rung_cap is not None:
                overflow += int((rung > rung_cap).sum())
            arrival = u_channel[:, j] >= drop_base ** power
            rung = np.where(arrival, 0, rung + 1)
            cov_trace = traces.lookup(rung)
            cost_sum += cov_trace

            if step % config.record_stride == 0 or step == horizon:
                running = cost_sum / step
                recorded_k.append(step)
                mean_curve.append(float(running.mean()))
                stderr_curve.append(
                    0.0 if reps < 2 else
                    float(running.std(ddof=1) / np.sqrt(reps)))
                sample["condition"].append(int(cond[0]))
                sample["harvest"].append(int(harvested[0]))
                sample["battery"].append(int(stored[0]))
                sample["power"].append(int(power[0]))
                sample["arrival"].append(int(arrival[0]))
                sample["cov_trace"].append(float(cov_trace[0]))
                sample["running"].append(float(running[0]))

            battery = stored - power
            cond = np.where(u_env[:, j] < to_good[cond], 0, 1)

    return SimTrace(
        label=label or getattr(policy, "kind", "policy"),
        record_steps=np.array(recorded_k, dtype=np.int64),
        mean_running_cost=np.array(mean_curve),
        stderr_running_cost=np.array(stderr_curve),
        final_costs=cost_sum / horizon,
        sample_condition=np.array(sample["condition"], dtype=np.int64),
        sample_harvest=np.array(sample["harvest"], dtype=np.int64),
        sample_battery=np.array(sample["battery"], dtype=np.int64),
        sample_power=np.array(sample["power"], dtype=np.int64),
        sample_arrival=np.array(sample["arrival"], dtype=np.int64),
        sample_cov_trace=np.array(sample["cov_trace"]),
        sample_running_cost=np.array(sample["running"]),
        rung_overflow_rate=overflow / (horizon * reps) if rung_cap is not None else 0.0,
    )


@dataclass(frozen=True)
class ComparisonRow:
    """Final-cost summary for one policy; diffs are paired against the reference."""

    label: str
    final_mean: float
    final_stderr: float
    mean_diff_vs_ref: float | None = None
    stderr_diff_vs_ref: float | None = None


@dataclass
class Comparison:
    """Aligned traces plus a paired summary table (first policy = reference)."""

    traces: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)


def compare(named_policies, system: SystemModel, channel: ChannelModel,
            energy: EnergyModel, config: SimConfig) -> Comparison:
    """Simulate several policies on common random numbers.

    ``named_policies`` is an ordered sequence of (label, policy); every
    policy sees identical environment, harvest, and channel streams, and the
    summary reports each policy's final cost alongside the paired difference
    against the first entry.
    """
    named_policies = list(named_policies)
    if not named_policies:
        raise ValueError("need at least one policy to compare")
    result = Comparison()
    for label, policy in named_policies:
        result.traces[label] = simulate(policy, system, channel, energy, config,
                                        label=label)
    ref_label = named_policies[0][0]
    ref_costs = result.traces[ref_label].final_costs
    for label, _ in named_policies:
        trace = result.traces[label]
        if label == ref_label:
            result.rows.append(ComparisonRow(
                label=label, final_mean=trace.final_mean,
                final_stderr=trace.final_stderr))
            continue
        diff = trace.final_costs - ref_costs
        stderr = 0.0 if diff.size < 2 else float(diff.std(ddof=1) / np.sqrt(diff.size))
        result.rows.append(ComparisonRow(
            label=label, final_mean=trace.final_mean, final_stderr=trace.final_stderr,
            mean_diff_vs_ref=float(diff.mean()), stderr_diff_vs_ref=stderr))
    return result
