"""Acceptance gate: eight checks with pinned tolerances and runtime caps.

Each test prints one verdict line of the form ``[acceptance N] name: PASS``
(or FAIL) and then asserts. The module is self-contained: oracles are
recomputed here rather than imported from the unit-test files.
"""

import math
import time

import numpy as np
import pytest
import yaml

from ehsched.channel import ChannelModel
from ehsched.cli import main
from ehsched.energy import EnergyModel, EnvironmentChain, HarvestDistribution
from ehsched.kalman import SystemModel, build_ladder, steady_state_covariance
from ehsched.mdp import (
    MdpProblem,
    brute_force_average_cost,
    policy_evaluate_exact,
    relative_value_iteration,
)
from ehsched.sim import SimConfig, compare, greedy_policy, simulate
from ehsched.threshold import ThresholdPolicy, build_transition_matrix, power_distribution
from ehsched.chains import stationary_distribution


def verdict(number: int, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[acceptance {number}] {name}: {status}"
    if detail:
        line = f"{line} ({detail})"
    print(line)
    assert passed, line


def baseline_system() -> SystemModel:
    return SystemModel(A=0.9, C=0.7, Q=0.8, R=0.8, initial_cov=0.8)


def baseline_energy() -> EnergyModel:
    return EnergyModel(
        chain=EnvironmentChain.from_stay_rates(p_gg=0.7, p_bg=0.2),
        harvest=HarvestDistribution(good=[0.1, 0.2, 0.3, 0.4],
                                    bad=[0.4, 0.3, 0.2, 0.1]),
        capacity=3)


# Golden pair-chain matrix for the baseline energy model, frozen at build
# time. Reproducing it requires caps (good=2, bad=1); see the note in the
# threshold tests about why the good-condition cap is the larger one here.
GOLDEN_PAIR_MATRIX = np.array([
    [0.07, 0.12, 0.14, 0.09, 0.21, 0.06, 0.28, 0.03],
    [0.02, 0.32, 0.04, 0.24, 0.06, 0.16, 0.08, 0.08],
    [0.07, 0.12, 0.14, 0.09, 0.21, 0.06, 0.28, 0.03],
    [0.02, 0.32, 0.04, 0.24, 0.06, 0.16, 0.08, 0.08],
    [0.07, 0.12, 0.14, 0.09, 0.21, 0.06, 0.28, 0.03],
    [0.00, 0.00, 0.02, 0.32, 0.04, 0.24, 0.14, 0.24],
    [0.00, 0.00, 0.07, 0.12, 0.14, 0.09, 0.49, 0.09],
    [0.00, 0.00, 0.00, 0.00, 0.02, 0.32, 0.18, 0.48],
])


def test_criterion_1_pair_chain_golden_matrix():
    matrix = build_transition_matrix(ThresholdPolicy(cap_good=2, cap_bad=1),
                                     baseline_energy())
    error = float(np.max(np.abs(matrix - GOLDEN_PAIR_MATRIX)))
    verdict(1, "threshold pair-chain matches the 64-entry golden matrix",
            error <= 1e-12, f"max abs error {error:.3g}, tol 1e-12")


def _random_model(rng):
    n = int(rng.integers(1, 5))
    a = rng.normal(size=(n, n))
    rho = max(abs(np.linalg.eigvals(a)))
    a *= rng.uniform(0.85, 1.25) / rho
    c = rng.normal(size=(n, n))
    m = rng.normal(size=(n, n))
    q = m @ m.T + 0.1 * np.eye(n)
    mr = rng.normal(size=(n, n))
    r = mr @ mr.T + 0.1 * np.eye(n)
    p0 = np.diag(rng.uniform(0.1, 2.0, size=n))
    return SystemModel(A=a, C=c, Q=q, R=r, initial_cov=p0)


def test_criterion_2_ladder_growth_property():
    start = time.perf_counter()
    rng = np.random.default_rng(20240517)
    ok = True
    for _ in range(20):
        ladder = build_ladder(_random_model(rng), depth=50)
        if not np.all(np.diff(ladder.traces) > 0.0):
            ok = False
            break
        for _ in range(10):
            i, j = sorted(rng.choice(51, size=2, replace=False))
            gap = ladder.rungs[j] - ladder.rungs[i]
            gap = (gap + gap.T) / 2.0
            # tolerance scales with the gap norm: deep rungs reach 1e9
            floor = -1e-9 * (1.0 + np.linalg.norm(gap))
            if np.linalg.eigvalsh(gap).min() < floor:
                ok = False
    elapsed = time.perf_counter() - start
    verdict(2, "drop-ladder traces strictly increase on 20 random models",
            ok and elapsed < 5.0, f"{elapsed:.2f}s, cap 5s")


def test_criterion_3_scalar_steady_state_oracle():
    a, c, q, r = 0.9, 0.7, 0.8, 0.8
    alpha = c * c * a * a
    beta = c * c * q + r - r * a * a
    root = (-beta + math.sqrt(beta * beta + 4.0 * alpha * r * q)) / (2.0 * alpha)
    steady = steady_state_covariance(baseline_system())[0, 0]
    error = abs(steady - root)
    verdict(3, "fixed-point steady covariance matches the quadratic root",
            error <= 1e-6 and abs(root - 0.757654) <= 1e-6,
            f"fixed point {steady:.12f}, root {root:.12f}, tol 1e-6")


def _random_tiny_problem(rng) -> MdpProblem:
    a = rng.uniform(0.5, 1.2)
    system = SystemModel(A=a, C=rng.uniform(0.4, 1.0), Q=rng.uniform(0.3, 1.0),
                         R=rng.uniform(0.3, 1.0), initial_cov=rng.uniform(0.3, 1.0))
    channel = ChannelModel(success_factor=rng.uniform(0.3, 0.9))
    b_max = int(rng.integers(0, 2))
    raw = rng.uniform(0.05, 1.0, size=(2, b_max + 1))
    raw /= raw.sum(axis=1, keepdims=True)
    energy = EnergyModel(
        chain=EnvironmentChain.from_stay_rates(p_gg=rng.uniform(0.2, 0.9),
                                               p_bg=rng.uniform(0.2, 0.9)),
        harvest=HarvestDistribution(good=raw[0], bad=raw[1]),
        capacity=b_max)
    return MdpProblem(system, channel, energy, n_trunc=int(rng.integers(2, 4)))


def test_criterion_4_solver_matches_brute_force():
    start = time.perf_counter()
    rng = np.random.default_rng(20240811)
    worst = 0.0
    for _ in range(10):
        problem = _random_tiny_problem(rng)
        solved = relative_value_iteration(problem)
        brute_cost, _ = brute_force_average_cost(problem)
        worst = max(worst, abs(solved.avg_cost - brute_cost))
    elapsed = time.perf_counter() - start
    verdict(4, "value iteration equals brute-force enumeration on 10 instances",
            worst <= 1e-8 and elapsed < 30.0,
            f"worst gap {worst:.3g}, tol 1e-8, {elapsed:.2f}s, cap 30s")


def test_criterion_5_monte_carlo_matches_exact_value():
    start = time.perf_counter()
    system, channel, energy = baseline_system(), ChannelModel(0.7), baseline_energy()
    problem = MdpProblem(system, channel, energy, n_trunc=30)
    policy = ThresholdPolicy(cap_good=1, cap_bad=2)
    exact = policy_evaluate_exact(problem, policy.as_lookup(problem))
    config = SimConfig(horizon=10_000, replications=1000, master_seed=12345)
    trace = simulate(policy, system, channel, energy, config)
    rel_error = abs(trace.final_mean - exact) / exact
    elapsed = time.perf_counter() - start
    verdict(5, "simulated long-run cost matches the exact chain value",
            rel_error <= 0.02 and elapsed < 60.0,
            f"relative error {rel_error:.3e}, tol 2e-2, {elapsed:.2f}s, cap 60s")


def test_criterion_6_threshold_beats_greedy_with_margin():
    start = time.perf_counter()
    system, channel, energy = baseline_system(), ChannelModel(0.7), baseline_energy()
    threshold = ThresholdPolicy(cap_good=1, cap_bad=2)
    config = SimConfig(horizon=10_000, replications=1000, master_seed=12345)
    outcome = compare([("threshold", threshold), ("greedy", greedy_policy())],
                      system, channel, energy, config)
    greedy_row = outcome.rows[1]
    margin = greedy_row.mean_diff_vs_ref / greedy_row.stderr_diff_vs_ref

    problem = MdpProblem(system, channel, energy, n_trunc=30)
    optimal = relative_value_iteration(problem).avg_cost
    exact_threshold = policy_evaluate_exact(problem, threshold.as_lookup(problem))
    elapsed = time.perf_counter() - start
    verdict(6, "threshold beats greedy by >3 paired standard errors",
            margin > 3.0 and optimal <= exact_threshold + 1e-12 and elapsed < 120.0,
            f"margin {margin:.1f} SE, optimal {optimal:.6f} <= "
            f"threshold {exact_threshold:.6f}, {elapsed:.2f}s, cap 120s")


def _piecewise_power_distribution(q, cap_good, cap_bad, capacity):
    # case-split long-run power law, valid only for cap_good < cap_bad
    out = np.zeros(capacity + 1)
    for i in range(capacity + 1):
        if i < cap_good:
            out[i] = q[2 * i] + q[2 * i + 1]
        elif i == cap_good:
            out[i] = (sum(q[2 * m] for m in range(cap_good, capacity + 1))
                      + q[2 * cap_good + 1])
        elif cap_good < i < cap_bad:
            out[i] = q[2 * i + 1]
        elif i == cap_bad:
            out[i] = sum(q[2 * m + 1] for m in range(cap_bad, capacity + 1))
    return out


def test_criterion_7_power_law_push_forward_consistency():
    energy = baseline_energy()
    capacity = energy.capacity
    worst = 0.0
    worst_sum = 0.0
    for cap_good in range(capacity + 1):
        for cap_bad in range(cap_good + 1, capacity + 1):
            policy = ThresholdPolicy(cap_good=cap_good, cap_bad=cap_bad)
            q = stationary_distribution(build_transition_matrix(policy, energy))
            generic = power_distribution(q, policy)
            oracle = _piecewise_power_distribution(q, cap_good, cap_bad, capacity)
            worst = max(worst, float(np.max(np.abs(generic - oracle))))
            worst_sum = max(worst_sum, abs(float(generic.sum()) - 1.0))
    verdict(7, "generic power push-forward equals the case-split law",
            worst <= 1e-12 and worst_sum <= 1e-12,
            f"max abs error {worst:.3g}, tol 1e-12")


def test_criterion_8_compare_command_is_deterministic(tmp_path):
    start = time.perf_counter()
    config = {
        "system": {"A": 0.9, "C": 0.7, "Q": 0.8, "R": 0.8},
        "channel": {"success_factor": 0.7},
        "energy": {"p_gg": 0.7, "p_bg": 0.2,
                   "good": [0.1, 0.2, 0.3, 0.4], "bad": [0.4, 0.3, 0.2, 0.1],
                   "b_max": 3},
        "mdp": {"n_trunc": 30},
        "thresholds": {"cap_good": 1, "cap_bad": 2},
        "sim": {"horizon": 10_000, "replications": 300, "master_seed": 12345,
                "record_stride": 10},
    }
    config_path = tmp_path / "exp.yaml"
    config_path.write_text(yaml.safe_dump(config))
    dirs = (tmp_path / "run_a", tmp_path / "run_b")
    codes = [main(["compare", "--config", str(config_path), "--out", str(d),
                   "--no-figures"]) for d in dirs]
    names = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*.csv"))
    identical = bool(names) and codes == [0, 0] and all(
        (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
        for name in names)
    elapsed = time.perf_counter() - start
    verdict(8, "repeated compare runs produce byte-identical files",
            identical and elapsed < 120.0,
            f"{len(names)} files, {elapsed:.2f}s, cap 120s")
