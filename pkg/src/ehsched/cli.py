"""Command-line harness.

Subcommands: solve, psi, simulate, compare, sweep.  Each takes --config and
--out (plus --seed to override the master seed), writes delimited artifacts
and figures under the output directory, and finishes with a manifest noting
the config hash and tool version.  Exit status is 0 only if every artifact
was written.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chains import stationary_distribution
from .config import ConfigError, ExperimentConfig, load_config
from .energy import Condition
from .io import write_csv, write_key_values
from .mdp import MdpProblem, SolverError, policy_evaluate_exact, relative_value_iteration
from .sim import SimConfig, compare, greedy_policy, simulate
from .threshold import (
    ThresholdPolicy,
    build_transition_matrix,
    index_pair,
    power_distribution,
    threshold_grid_search,
)

PAIR_CONVENTION = ("pair index = 2*battery + condition with condition 0=good, 1=bad; "
                   "battery counted after harvest")
STATE_CONVENTION = ("flat_index = (battery*2 + condition)*(n_trunc+1) + rung; "
                    "condition 0=good, 1=bad")


def _apply_seed(config: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return config
    sim = config.sim
    new_sim = SimConfig(horizon=sim.horizon, replications=sim.replications,
                        master_seed=seed, record_stride=sim.record_stride,
                        initial_battery=sim.initial_battery,
                        initial_condition=sim.initial_condition)
    return ExperimentConfig(system=config.system, channel=config.channel,
                            energy=config.energy, mdp=config.mdp, sim=new_sim,
                            thresholds=config.thresholds, sha256=config.sha256)


def _write_manifest(out_dir: Path, command: str, config: ExperimentConfig,
                    seed: int | None) -> None:
    pairs = [("tool", "ehsched"), ("version", __version__), ("command", command),
             ("config_sha256", config.sha256)]
    if seed is not None:
        pairs.append(("seed_override", seed))
    write_key_values(out_dir / "manifest.txt", pairs)


def _build_problem(config: ExperimentConfig) -> MdpProblem:
    return MdpProblem(config.system, config.channel, config.energy,
                      n_trunc=config.mdp.n_trunc)


def _pair_labels(capacity: int):
    return [f"b{battery}_{cond.name[0]}"
            for battery in range(capacity + 1)
            for cond in (Condition.GOOD, Condition.BAD)]


def cmd_solve(config: ExperimentConfig, out_dir: Path, figures: bool = True) -> None:
    problem = _build_problem(config)
    result = relative_value_iteration(problem, tol=config.mdp.tol,
                                      max_iter=config.mdp.max_iter)
    solve_dir = out_dir / "solve"
    write_csv(
        solve_dir / "policy.csv",
        ["flat_index", "m", "n", "l", "action", "H"],
        [(s.flat_index, s.battery, int(s.condition), s.rung,
          result.policy.table[s.flat_index], result.relative_values[s.flat_index])
         for s in problem.states],
        comment=STATE_CONVENTION)
    write_csv(
        solve_dir / "summary.csv",
        ["key", "value"],
        [("avg_cost", result.avg_cost),
         ("iterations", result.iterations),
         ("residual_span", result.residual),
         ("n_states", problem.n_states),
         ("n_trunc", problem.n_trunc),
         ("top_rung_mass", result.top_rung_mass),
         ("truncation_gap_bound", result.truncation_gap_bound)])
    if figures:
        from . import report
        report.policy_heatmap(problem, result.policy, solve_dir / "policy.png")


def cmd_psi(config: ExperimentConfig, out_dir: Path, figures: bool = True) -> None:
    if config.thresholds is None:
        raise ConfigError("thresholds", "section is required for the psi command")
    policy = config.thresholds
    matrix = build_transition_matrix(policy, config.energy)
    q = stationary_distribution(matrix, init=pairchain_init(config))
    power = power_distribution(q, policy)
    labels = _pair_labels(config.energy.capacity)
    psi_dir = out_dir / "psi"
    write_csv(psi_dir / "transition_matrix.csv",
              ["state"] + labels,
              [[labels[i]] + list(row) for i, row in enumerate(matrix)],
              comment=PAIR_CONVENTION)
    write_csv(psi_dir / "stationary.csv",
              ["pair_index", "battery", "condition", "probability"],
              [(i, *_pair_fields(i), q[i]) for i in range(q.size)],
              comment=PAIR_CONVENTION)
    write_csv(psi_dir / "power_distribution.csv",
              ["power", "probability"],
              list(enumerate(power)))
    if figures:
        from . import report
        report.matrix_heatmap(matrix, psi_dir / "transition_matrix.png")
        report.power_histogram(power, psi_dir / "power_distribution.png")


def _pair_fields(index: int):
    battery, cond = index_pair(index)
    return battery, int(cond)


def pairchain_init(config: ExperimentConfig) -> int:
    from .threshold import pair_index
    return pair_index(config.energy.initial_battery, config.energy.initial_condition)


def _named_policies(config: ExperimentConfig, which: str):
    """Resolve policy labels to instances, solving the MDP when asked."""
    known = {}
    if config.thresholds is not None:
        known["threshold"] = config.thresholds
    known["greedy"] = greedy_policy()
    if which == "optimal":
        problem = _build_problem(config)
        result = relative_value_iteration(problem, tol=config.mdp.tol,
                                          max_iter=config.mdp.max_iter)
        return [("optimal", result.policy)]
    if which not in known:
        raise ConfigError("thresholds",
                          "section is required to simulate the threshold schedule")
    return [(which, known[which])]


def _sim_trace_rows(trace):
    return zip(trace.record_steps, trace.sample_condition, trace.sample_harvest,
               trace.sample_battery, trace.sample_power, trace.sample_arrival,
               trace.sample_cov_trace, trace.sample_running_cost)


def cmd_simulate(config: ExperimentConfig, out_dir: Path, policy_name: str = None,
                 figures: bool = True) -> None:
    which = policy_name or ("threshold" if config.thresholds is not None else "greedy")
    [(label, policy)] = _named_policies(config, which)
    trace = simulate(policy, config.system, config.channel, config.energy,
                     config.sim, label=label)
    sim_dir = out_dir / "sim"
    _write_curve(sim_dir / f"curve_{label}.csv", trace)
    write_csv(sim_dir / f"trace_{label}.csv",
              ["k", "condition", "harvest", "battery_after_harvest", "power",
               "arrival", "cov_trace", "running_avg"],
              _sim_trace_rows(trace),
              comment="replication 0 only; condition 0=good, 1=bad")
    write_csv(sim_dir / "summary.csv",
              ["policy", "final_mean", "final_stderr", "replications", "horizon",
               "rung_overflow_rate"],
              [(label, trace.final_mean, trace.final_stderr,
                config.sim.replications, config.sim.horizon,
                trace.rung_overflow_rate)])
    if figures:
        from . import report
        report.cost_curves({label: trace}, sim_dir / "curves.png")


def _write_curve(path, trace) -> None:
    write_csv(path, ["k", "mean_Jk", "stderr_Jk"],
              zip(trace.record_steps, trace.mean_running_cost,
                  trace.stderr_running_cost))


def cmd_compare(config: ExperimentConfig, out_dir: Path, figures: bool = True) -> None:
    policies = []
    exact = {}
    problem = _build_problem(config)
    try:
        result = relative_value_iteration(problem, tol=config.mdp.tol,
                                          max_iter=config.mdp.max_iter)
        policies.append(("optimal", result.policy))
        exact["optimal"] = result.avg_cost
    except SolverError as exc:
        print(f"warning: skipping optimal policy ({exc})", file=sys.stderr)
    if config.thresholds is not None:
        policies.append(("threshold", config.thresholds))
        exact["threshold"] = policy_evaluate_exact(
            problem, config.thresholds.as_lookup(problem))
    policies.append(("greedy", greedy_policy()))

    outcome = compare(policies, config.system, config.channel, config.energy,
                      config.sim)
    sim_dir = out_dir / "sim"
    for label, trace in outcome.traces.items():
        _write_curve(sim_dir / f"curve_{label}.csv", trace)
    write_csv(sim_dir / "summary.csv",
              ["policy", "final_mean", "final_stderr", "exact_cost",
               "mean_diff_vs_ref", "stderr_diff_vs_ref"],
              [(row.label, row.final_mean, row.final_stderr,
                "" if row.label not in exact else exact[row.label],
                "" if row.mean_diff_vs_ref is None else row.mean_diff_vs_ref,
                "" if row.stderr_diff_vs_ref is None else row.stderr_diff_vs_ref)
               for row in outcome.rows],
              comment="diffs are paired against the first policy on common random numbers")
    if figures:
        from . import report
        report.cost_curves(outcome.traces, sim_dir / "curves.png")


def cmd_sweep(config: ExperimentConfig, out_dir: Path, figures: bool = True) -> None:
    problem = _build_problem(config)
    capacity = problem.capacity
    costs = np.empty((capacity + 1, capacity + 1))
    rows = []
    for cap_good in range(capacity + 1):
        for cap_bad in range(capacity + 1):
            policy = ThresholdPolicy(cap_good=cap_good, cap_bad=cap_bad)
            cost = policy_evaluate_exact(problem, policy.as_lookup(problem))
            costs[cap_good, cap_bad] = cost
            rows.append((cap_good, cap_bad, cost))
    best_policy, best_cost = threshold_grid_search(problem)
    sweep_dir = out_dir / "sweep"
    write_csv(sweep_dir / "grid.csv", ["cap_good", "cap_bad", "exact_cost"], rows)
    write_csv(sweep_dir / "summary.csv", ["key", "value"],
              [("best_cap_good", best_policy.cap_good),
               ("best_cap_bad", best_policy.cap_bad),
               ("best_cost", best_cost)])
    if figures:
        from . import report
        report.threshold_grid(costs, (best_policy.cap_good, best_policy.cap_bad),
                              sweep_dir / "grid.png")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehsched",
        description="Transmission power scheduling for remote state estimation")
    parser.add_argument("--version", action="version", version=f"ehsched {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "solve": "solve the average-cost MDP and export the optimal schedule",
        "psi": "closed-form analysis of the configured threshold schedule",
        "simulate": "Monte Carlo run of one policy",
        "compare": "simulate optimal, threshold, and greedy on shared randomness",
        "sweep": "exact cost of every threshold pair",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="experiment YAML file")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the simulation master seed")
        cmd.add_argument("--no-figures", action="store_true",
                         help="skip PNG rendering")
        if name == "simulate":
            cmd.add_argument("--policy", choices=["threshold", "greedy", "optimal"],
                             default=None, help="which policy to run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)
    try:
        config = _apply_seed(load_config(args.config), args.seed)
        figures = not args.no_figures
        if args.command == "solve":
            cmd_solve(config, out_dir, figures)
        elif args.command == "psi":
            cmd_psi(config, out_dir, figures)
        elif args.command == "simulate":
            cmd_simulate(config, out_dir, args.policy, figures)
        elif args.command == "compare":
            cmd_compare(config, out_dir, figures)
        elif args.command == "sweep":
            cmd_sweep(config, out_dir, figures)
        _write_manifest(out_dir, args.command, config, args.seed)
    except (ConfigError, SolverError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
