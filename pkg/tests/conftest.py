import numpy as np
import pytest

from app_config import ExperimentConfig

SMALL_OVERRIDES = {
    "env.num_auvs": 2,
    "env.macro_steps": 2,
    "env.micro_steps": 5,
    "net.actor_hidden": 8,
    "net.critic_hidden": 8,
    "net.macro_hidden": 8,
    "ppo.micro_batch": 8,
    "ppo.macro_batch": 2,
    "ppo.epochs": 2,
    "train.episodes": 1,
    "eval.episodes": 2,
    "run.seed": 3,
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    return ExperimentConfig(SMALL_OVERRIDES)


@pytest.fixture
def make_config():
    def build(**overrides):
        values = dict(SMALL_OVERRIDES)
        values.update({k.replace("__", "."): v for k, v in overrides.items()})
        return ExperimentConfig(values)
    return build


@pytest.fixture
def small_cli_args():
    args = []
    for key, value in SMALL_OVERRIDES.items():
        args += ["--set", f"{key}={value}"]
    return args
