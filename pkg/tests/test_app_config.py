import pytest

from app_config import (CONFIG_KEYS, RESOLVED_CONFIG_FILENAME, ConfigError, ExperimentConfig, load_config,
                        overrides_from_args, parse_override, parse_properties)
from data_model import ThorpVariant


def test_defaults():
    config = ExperimentConfig()
    assert config.num_auvs == 6
    assert config["covert.epsilon"] == 0.05
    assert config["ppo.gamma"] == 0.99
    assert config["ppo.clip"] == 0.2
    assert config["env.macro_steps"] == 10
    assert config["env.micro_steps"] == 100
    assert config["train.episodes"] == 2000
    assert config.covert_limit == pytest.approx(0.005)
    assert config.channel_params().thorp_variant is ThorpVariant.STANDARD_F2
    assert config.channel_params().noise_override == 0.2


def test_override_epsilon():
    config = load_config(overrides={"covert.epsilon": "0.01"})
    assert config["covert.epsilon"] == 0.01
    assert config.covert_limit == pytest.approx(2e-4)


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="epsilonn"):
        load_config(overrides={"epsilonn": "0.1"})


@pytest.mark.parametrize("key, value", [
    ("env.num_auvs", "0"), ("env.num_auvs", "2.5"), ("covert.epsilon", "1.5"), ("channel.thorp_variant", "cubic"),
    ("env.eavesdropper", "1, 2"), ("env.stop_on_arrival", "maybe"), ("channel.spreading_chi", "3"),
    ("task.length", "500"), ("reward.phi4", "1"),
])
def test_invalid_values_are_rejected(key, value):
    with pytest.raises(ConfigError, match=key.split(".")[-1]):
        ExperimentConfig({key: value})


def test_properties_grammar():
    pairs = parse_properties("# comment\n\nenv.num_auvs = 3\ncovert.epsilon=0.1  # tighter\n")
    assert pairs == {"env.num_auvs": "3", "covert.epsilon": "0.1"}
    with pytest.raises(ConfigError, match=":2:"):
        parse_properties("env.num_auvs = 3\nnot a pair\n", source="bad.properties")


def test_hash_inside_a_value_is_kept(tmp_path):
    assert parse_properties("run.output_dir = runs/exp#2   # second try\n") == {"run.output_dir": "runs/exp#2"}
    config = load_config(overrides={"run.output_dir": "runs/exp#2"})
    assert load_config(config.write_resolved(str(tmp_path)))["run.output_dir"] == "runs/exp#2"


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.properties"
    path.write_text("env.num_auvs = 3\ncovert.epsilon = 0.1\nenv.eavesdropper = 10, 20, 0\n", encoding="utf-8")
    config = load_config(str(path), {"covert.epsilon": "0.02"})
    assert config.num_auvs == 3
    assert config["covert.epsilon"] == 0.02
    assert config["env.eavesdropper"] == (10.0, 20.0, 0.0)
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.properties"))


def test_resolved_echo_round_trips(tmp_path):
    config = load_config(overrides={"covert.epsilon": "0.1234567890123", "net.share_actor": "false",
                                    "task.sonar_beam": "0.7"})
    path = config.write_resolved(str(tmp_path))
    assert path.endswith(RESOLVED_CONFIG_FILENAME)
    text = (tmp_path / RESOLVED_CONFIG_FILENAME).read_text(encoding="utf-8")
    assert text.startswith("# resolved configuration")
    names = [line.split(" = ")[0] for line in text.splitlines()[1:]]
    assert names == [k.name for k in CONFIG_KEYS]
    assert load_config(path) == config


def test_hash_ignores_run_bookkeeping():
    base = ExperimentConfig()
    assert base.with_overrides({"run.seed": 5, "run.workers": 4, "train.episodes": 3}).config_hash() == base.config_hash()
    assert base.with_overrides({"covert.epsilon": 0.1}).config_hash() != base.config_hash()


def test_typed_views():
    config = ExperimentConfig({"ppo.micro_batch": 64, "ppo.macro_batch": 8, "channel.use_noise_override": False})
    assert config.ppo_config("micro").minibatch == 64
    assert config.ppo_config("macro").minibatch == 8
    assert config.channel_params().noise_override is None
    assert config.reward_weights().xi == (10.0, -0.01, 1.0)
    assert config.energy_params().slot_dt == config["env.slot_dt"]
    assert config.arena_lower == (0.0, 0.0, -100.0)
    with pytest.raises(ConfigError):
        config.ppo_config("meso")


def test_override_parsing():
    assert parse_override("covert.epsilon = 0.1") == ("covert.epsilon", "0.1")
    assert overrides_from_args(["a=1", "b = x=y"]) == {"a": "1", "b": "x=y"}
    with pytest.raises(ConfigError):
        parse_override("novalue")
