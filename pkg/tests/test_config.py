"""Config loader tests: every failure must name the offending field."""

import math

import numpy as np
import pytest
import yaml

from ehsched.config import ConfigError, load_config
from ehsched.energy import Condition


def base_dict():
    return {
        "system": {"A": 0.9, "C": 0.7, "Q": 0.8, "R": 0.8},
        "channel": {"success_factor": 0.7},
        "energy": {
            "p_gg": 0.7, "p_bg": 0.2,
            "good": [0.1, 0.2, 0.3, 0.4], "bad": [0.4, 0.3, 0.2, 0.1],
            "b_max": 3,
        },
        "mdp": {"n_trunc": 12},
        "thresholds": {"cap_good": 1, "cap_bad": 2},
        "sim": {"horizon": 200, "replications": 8, "master_seed": 7,
                "record_stride": 20},
    }


def dump(tmp_path, data, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


class TestValidConfig:
    def test_baseline_round_trip(self, tmp_path):
        config = load_config(dump(tmp_path, base_dict()))
        assert config.channel.success_factor == 0.7
        assert config.energy.capacity == 3
        assert config.energy.initial_battery == 0
        assert config.energy.initial_condition is Condition.GOOD
        assert config.mdp.n_trunc == 12
        assert config.thresholds.cap_good == 1
        assert config.thresholds.cap_bad == 2
        assert config.sim.horizon == 200
        assert len(config.sha256) == 64

    def test_initial_cov_defaults_to_process_noise(self, tmp_path):
        config = load_config(dump(tmp_path, base_dict()))
        np.testing.assert_array_equal(config.system.initial_cov, config.system.Q)

    def test_initial_cov_override(self, tmp_path):
        data = base_dict()
        data["system"]["initial_cov"] = 2.5
        config = load_config(dump(tmp_path, data))
        assert config.system.initial_cov[0, 0] == 2.5

    def test_matrix_valued_system(self, tmp_path):
        data = base_dict()
        data["system"].update(
            A=[[1.0, 0.3], [0.0, 0.8]], C=[[1.0, 0.0]],
            Q=[[0.5, 0.0], [0.0, 0.5]], R=0.6)
        config = load_config(dump(tmp_path, data))
        assert config.system.A.shape == (2, 2)

    def test_defaults_without_optional_sections(self, tmp_path):
        data = base_dict()
        del data["mdp"], data["thresholds"], data["sim"]
        config = load_config(dump(tmp_path, data))
        assert config.mdp.n_trunc == 30
        assert config.mdp.tol == 1e-10
        assert config.thresholds is None
        assert config.sim.horizon == 10_000
        assert config.sim.replications == 1000

    def test_shipping_config_loads(self):
        config = load_config("configs/scalar_baseline.yaml")
        assert config.energy.capacity == 3
        assert config.sim.record_stride == 10

    def test_condition_spellings(self, tmp_path):
        data = base_dict()
        data["energy"]["e0"] = "bad"
        config = load_config(dump(tmp_path, data))
        assert config.energy.initial_condition is Condition.BAD

    def test_sim_initial_state_overrides(self, tmp_path):
        data = base_dict()
        data["sim"]["b0"] = 2
        data["sim"]["e0"] = "B"
        config = load_config(dump(tmp_path, data))
        assert config.sim.initial_battery == 2
        assert config.sim.initial_condition is Condition.BAD


class TestChannelForms:
    def test_link_budget_only(self, tmp_path):
        data = base_dict()
        data["channel"] = {"snr_gain": math.log(10.0 / 3.0),
                           "noise_density": 0.5, "bandwidth": 2.0}
        config = load_config(dump(tmp_path, data))
        assert abs(config.channel.success_factor - 0.7) < 1e-12
        assert config.channel.snr_gain is not None

    def test_stated_and_budget_must_agree(self, tmp_path):
        data = base_dict()
        data["channel"] = {"success_factor": 0.7,
                           "snr_gain": math.log(10.0 / 3.0),
                           "noise_density": 1.0, "bandwidth": 1.0}
        config = load_config(dump(tmp_path, data))
        assert abs(config.channel.success_factor - 0.7) < 1e-12

    def test_disagreement_is_an_error(self, tmp_path):
        data = base_dict()
        data["channel"] = {"success_factor": 0.6,
                           "snr_gain": math.log(10.0 / 3.0),
                           "noise_density": 1.0, "bandwidth": 1.0}
        with pytest.raises(ConfigError, match="channel.success_factor"):
            load_config(dump(tmp_path, data))

    def test_partial_budget_names_missing_field(self, tmp_path):
        data = base_dict()
        data["channel"] = {"snr_gain": 1.0, "bandwidth": 2.0}
        with pytest.raises(ConfigError, match="channel.noise_density"):
            load_config(dump(tmp_path, data))

    def test_empty_channel_rejected(self, tmp_path):
        data = base_dict()
        data["channel"] = {}
        with pytest.raises(ConfigError, match="channel"):
            load_config(dump(tmp_path, data))


def mutate(data, path, value):
    section = data
    for key in path[:-1]:
        section = section[key]
    if value is ...:
        del section[path[-1]]
    else:
        section[path[-1]] = value
    return data


class TestFieldErrors:
    @pytest.mark.parametrize("path,value,field", [
        (("system",), ..., "system"),
        (("system", "A"), ..., "system.A"),
        (("system", "A"), "wide", "system.A"),
        (("system", "extra"), 1, "system.extra"),
        (("system", "R"), 0.0, "system"),
        (("channel", "success_factor"), 1.0, "channel.success_factor"),
        (("channel", "success_factor"), "high", "channel.success_factor"),
        (("energy", "p_gg"), 1.5, "energy"),
        (("energy", "good"), [0.5, 0.5], "energy.good"),
        (("energy", "good"), [0.1, 0.2, 0.3, 0.3], "energy.good"),
        (("energy", "bad"), [0.4, 0.3, 0.2, -0.1], "energy.bad"),
        (("energy", "b_max"), -1, "energy.b_max"),
        (("energy", "b_max"), 2.5, "energy.b_max"),
        (("energy", "b0"), 9, "energy.b0"),
        (("energy", "e0"), "maybe", "energy.e0"),
        (("mdp", "n_trunc"), 0, "mdp.n_trunc"),
        (("mdp", "tol"), 0.0, "mdp.tol"),
        (("mdp", "max_iter"), 0, "mdp.max_iter"),
        (("thresholds", "cap_good"), 4, "thresholds.cap_good"),
        (("thresholds", "cap_bad"), -1, "thresholds.cap_bad"),
        (("thresholds", "cap_bad"), ..., "thresholds.cap_bad"),
        (("sim", "horizon"), 0, "sim"),
        (("sim", "b0"), 7, "sim.b0"),
        (("sim", "e0"), "Z", "sim.e0"),
        (("sim", "replications"), True, "sim.replications"),
    ])
    def test_error_names_field(self, tmp_path, path, value, field):
        data = mutate(base_dict(), path, value)
        with pytest.raises(ConfigError) as excinfo:
            load_config(dump(tmp_path, data))
        assert str(excinfo.value).startswith(field + ":")

    def test_unknown_top_level_section(self, tmp_path):
        data = base_dict()
        data["plots"] = {}
        with pytest.raises(ConfigError, match="file.plots"):
            load_config(dump(tmp_path, data))

    def test_non_mapping_file(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="file"):
            load_config(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("system: [unclosed\n")
        with pytest.raises(ConfigError, match="not valid YAML"):
            load_config(path)

    def test_fieldname_attribute(self, tmp_path):
        data = mutate(base_dict(), ("energy", "good"), [0.5, 0.5])
        with pytest.raises(ConfigError) as excinfo:
            load_config(dump(tmp_path, data))
        assert excinfo.value.fieldname == "energy.good"
