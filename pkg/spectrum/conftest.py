"""Shared fixtures: a four-BS toy network and small experiment configs."""

import numpy as np
import pytest

from spectrum.config import ExperimentConfig
from spectrum.harness.experiment import build_experiment
from spectrum.mac.env import Policy
from spectrum.mac.observations import N_ACTIONS, ConObservation, Decision

TOY_POSITIONS = [[0.0, 0.0], [40.0, 0.0], [0.0, 40.0], [40.0, 40.0]]


class RandomPolicy(Policy):
    """Uniform over the eight action codes."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, bs: int, observation: ConObservation) -> Decision:
        return Decision(int(self.rng.integers(N_ACTIONS)), 1.0 / N_ACTIONS)


class SilentPolicy(Policy):
    def act(self, bs: int, observation: ConObservation) -> Decision:
        return Decision(0)


def toy_config_dict(**overrides) -> dict:
    base = {
        "bs_positions": TOY_POSITIONS,
        "episode_length": 12,
        "n_batch": 2,
        "iterations": 2,
        "hidden_dims": [8],
        "recurrent_width": 4,
        "bptt_window": 5,
        "configuration_pool_size": 50,
        "validation_every": 1,
        "validation_configurations": 2,
        "validation_realizations": 2,
        "adaptive_ed_thresholds_dbm": [-52.0, -72.0, -92.0],
    }
    base.update(overrides)
    return base


@pytest.fixture
def toy_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict(toy_config_dict())


@pytest.fixture
def toy_experiment(toy_config):
    return build_experiment(toy_config)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def random_policy(rng) -> RandomPolicy:
    return RandomPolicy(rng)
