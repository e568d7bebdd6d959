"""Experiment configuration: one YAML file describes one study.

Every probability is written as a decimal and matrices as nested arrays.
Validation errors always name the offending field, e.g.
``energy.good: must sum to 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .channel import ChannelModel, success_factor_from_params
from .energy import Condition, EnergyModel, EnvironmentChain, HarvestDistribution
from .io import sha256_file
from .kalman import SystemModel
from .sim import SimConfig
from .threshold import ThresholdPolicy

# a directly stated success factor must agree with the link-budget value
CHANNEL_AGREE_TOL = 1e-9


class ConfigError(ValueError):
    """Configuration problem, tagged with the field that caused it."""

    def __init__(self, fieldname: str, message: str):
        self.fieldname = fieldname
        super().__init__(f"{fieldname}: {message}")


@dataclass(frozen=True)
class MdpSettings:
    n_trunc: int = 30
    tol: float = 1e-10
    max_iter: int = 100_000

    def __post_init__(self):
        if self.n_trunc < 1:
            raise ConfigError("mdp.n_trunc", f"must be >= 1, got {self.n_trunc}")
        if self.tol <= 0.0:
            raise ConfigError("mdp.tol", f"must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError("mdp.max_iter", f"must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated models plus solver and simulation settings."""

    system: SystemModel
    channel: ChannelModel
    energy: EnergyModel
    mdp: MdpSettings
    sim: SimConfig
    thresholds: ThresholdPolicy | None = None
    sha256: str = field(default="", compare=False)


def _section(raw: dict, name: str, required: bool = True) -> dict:
    value = raw.get(name)
    if value is None:
        if required:
            raise ConfigError(name, "section is missing")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(name, f"must be a mapping, got {type(value).__name__}")
    return value


def _known_keys(section: dict, prefix: str, allowed) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"{prefix}.{sorted(unknown)[0]}", "unknown field")


def _get(section: dict, prefix: str, key: str, required: bool = True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{prefix}.{key}", "field is missing")
        return default
    return section[key]


def _float(section, prefix, key, required=True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{prefix}.{key}", "field is missing")
        return default
    value = section[key]
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.{key}", f"must be a number, got {value!r}") from None


def _int(section, prefix, key, required=True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{prefix}.{key}", "field is missing")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{prefix}.{key}", f"must be an integer, got {value!r}")
    return int(value)


def _matrix(section, prefix, key):
    value = _get(section, prefix, key)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.{key}", "must be a numeric array") from None
    if arr.ndim > 2:
        raise ConfigError(f"{prefix}.{key}", f"must be at most 2-D, got shape {arr.shape}")
    return arr


def _vector(section, prefix, key):
    value = _get(section, prefix, key)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.{key}", "must be a numeric vector") from None
    if arr.ndim != 1:
        raise ConfigError(f"{prefix}.{key}", f"must be a flat list, got shape {arr.shape}")
    return arr


def _parse_system(raw: dict) -> SystemModel:
    sec = _section(raw, "system")
    _known_keys(sec, "system", {"A", "C", "Q", "R", "initial_cov"})
    a = _matrix(sec, "system", "A")
    kwargs = dict(
        A=a,
        C=_matrix(sec, "system", "C"),
        Q=_matrix(sec, "system", "Q"),
        R=_matrix(sec, "system", "R"),
    )
    if "initial_cov" in sec:
        kwargs["initial_cov"] = _matrix(sec, "system", "initial_cov")
    else:
        kwargs["initial_cov"] = kwargs["Q"]
    try:
        return SystemModel(**kwargs)
    except ValueError as exc:
        raise ConfigError("system", str(exc)) from None


def _parse_channel(raw: dict) -> ChannelModel:
    sec = _section(raw, "channel")
    _known_keys(sec, "channel", {"success_factor", "snr_gain", "noise_density", "bandwidth"})
    stated = _float(sec, "channel", "success_factor", required=False)
    budget_keys = [k for k in ("snr_gain", "noise_density", "bandwidth") if k in sec]
    if stated is None and not budget_keys:
        raise ConfigError("channel", "give success_factor or snr_gain/noise_density/bandwidth")
    derived = None
    if budget_keys:
        if len(budget_keys) != 3:
            missing = sorted({"snr_gain", "noise_density", "bandwidth"} - set(budget_keys))[0]
            raise ConfigError(f"channel.{missing}", "field is missing")
        try:
            derived = success_factor_from_params(
                _float(sec, "channel", "snr_gain"),
                _float(sec, "channel", "noise_density"),
                _float(sec, "channel", "bandwidth"))
        except ValueError as exc:
            raise ConfigError("channel", str(exc)) from None
    if stated is not None and derived is not None and abs(stated - derived) > CHANNEL_AGREE_TOL:
        raise ConfigError(
            "channel.success_factor",
            f"stated value {stated!r} disagrees with the link-budget value "
            f"{derived!r} (tolerance {CHANNEL_AGREE_TOL})")
    try:
        if derived is not None:
            return ChannelModel.from_params(
                _float(sec, "channel", "snr_gain"),
                _float(sec, "channel", "noise_density"),
                _float(sec, "channel", "bandwidth"))
        return ChannelModel(success_factor=stated)
    except ValueError as exc:
        raise ConfigError("channel.success_factor", str(exc)) from None


def _parse_condition(value, fieldname: str) -> Condition:
    if isinstance(value, str) and value.upper() in ("G", "GOOD"):
        return Condition.GOOD
    if isinstance(value, str) and value.upper() in ("B", "BAD"):
        return Condition.BAD
    raise ConfigError(fieldname, f"must be 'G' or 'B', got {value!r}")


def _parse_energy(raw: dict) -> EnergyModel:
    sec = _section(raw, "energy")
    _known_keys(sec, "energy", {"p_gg", "p_bg", "good", "bad", "b_max", "b0", "e0"})
    b_max = _int(sec, "energy", "b_max")
    if b_max < 0:
        raise ConfigError("energy.b_max", f"must be >= 0, got {b_max}")
    try:
        chain = EnvironmentChain.from_stay_rates(
            p_gg=_float(sec, "energy", "p_gg"), p_bg=_float(sec, "energy", "p_bg"))
    except ValueError as exc:
        raise ConfigError("energy", str(exc)) from None
    good = _vector(sec, "energy", "good")
    bad = _vector(sec, "energy", "bad")
    for name, vec in (("good", good), ("bad", bad)):
        if vec.size != b_max + 1:
            raise ConfigError(
                f"energy.{name}",
                f"support must be exactly {{0..{b_max}}} ({b_max + 1} entries), "
                f"got {vec.size}")
    try:
        harvest = HarvestDistribution(good=good, bad=bad)
    except ValueError as exc:
        field_name = "energy.good" if "good" in str(exc) else "energy.bad"
        raise ConfigError(field_name, str(exc)) from None
    b0 = _int(sec, "energy", "b0", required=False, default=0)
    e0 = _parse_condition(_get(sec, "energy", "e0", required=False, default="G"), "energy.e0")
    try:
        return EnergyModel(chain=chain, harvest=harvest, capacity=b_max,
                           initial_battery=b0, initial_condition=e0)
    except ValueError as exc:
        raise ConfigError("energy.b0", str(exc)) from None


def _parse_mdp(raw: dict) -> MdpSettings:
    sec = _section(raw, "mdp", required=False)
    _known_keys(sec, "mdp", {"n_trunc", "tol", "max_iter"})
    return MdpSettings(
        n_trunc=_int(sec, "mdp", "n_trunc", required=False, default=30),
        tol=_float(sec, "mdp", "tol", required=False, default=1e-10),
        max_iter=_int(sec, "mdp", "max_iter", required=False, default=100_000))


def _parse_thresholds(raw: dict, capacity: int) -> ThresholdPolicy | None:
    if "thresholds" not in raw:
        return None
    sec = _section(raw, "thresholds")
    _known_keys(sec, "thresholds", {"cap_good", "cap_bad"})
    cap_good = _int(sec, "thresholds", "cap_good")
    cap_bad = _int(sec, "thresholds", "cap_bad")
    for name, cap in (("cap_good", cap_good), ("cap_bad", cap_bad)):
        if not 0 <= cap <= capacity:
            raise ConfigError(
                f"thresholds.{name}",
                f"must lie in [0, {capacity}] (battery capacity), got {cap}")
    return ThresholdPolicy(cap_good=cap_good, cap_bad=cap_bad)


def _parse_sim(raw: dict, energy: EnergyModel) -> SimConfig:
    sec = _section(raw, "sim", required=False)
    _known_keys(sec, "sim", {"horizon", "replications", "master_seed", "record_stride",
                             "b0", "e0"})
    b0 = _int(sec, "sim", "b0", required=False, default=None)
    if b0 is not None and not 0 <= b0 <= energy.capacity:
        raise ConfigError("sim.b0", f"must lie in [0, {energy.capacity}], got {b0}")
    e0_raw = _get(sec, "sim", "e0", required=False, default=None)
    e0 = None if e0_raw is None else _parse_condition(e0_raw, "sim.e0")
    horizon = _int(sec, "sim", "horizon", required=False, default=10_000)
    replications = _int(sec, "sim", "replications", required=False, default=1000)
    master_seed = _int(sec, "sim", "master_seed", required=False, default=12345)
    record_stride = _int(sec, "sim", "record_stride", required=False, default=1)
    try:
        return SimConfig(horizon=horizon, replications=replications,
                         master_seed=master_seed, record_stride=record_stride,
                         initial_battery=b0, initial_condition=e0)
    except ValueError as exc:
        raise ConfigError("sim", str(exc)) from None


def load_config(path) -> ExperimentConfig:
    """Parse and validate one experiment file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError("file", f"not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("file", "top level must be a mapping of sections")
    _known_keys(raw, "file",
                {"system", "channel", "energy", "mdp", "thresholds", "sim"})
    system = _parse_system(raw)
    channel = _parse_channel(raw)
    energy = _parse_energy(raw)
    mdp = _parse_mdp(raw)
    thresholds = _parse_thresholds(raw, energy.capacity)
    sim = _parse_sim(raw, energy)
    return ExperimentConfig(system=system, channel=channel, energy=energy,
                            mdp=mdp, sim=sim, thresholds=thresholds,
                            sha256=sha256_file(path))
