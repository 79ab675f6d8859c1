"""
Energy-detection (listen-before-talk) baselines: a fixed threshold and the
genie sweep that picks the best threshold per UE configuration.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from spectrum.channel.layout import UeConfiguration
from spectrum.config import DEFAULT_ED_SWEEP_DBM, dbm_to_watts
from spectrum.exceptions import ConfigurationError
from spectrum.mac.env import Policy, SpectrumSharingEnv
from spectrum.mac.observations import ConObservation, Decision

logger = logging.getLogger(__name__)

ED_MIN_DBM = min(DEFAULT_ED_SWEEP_DBM)
ED_MAX_DBM = max(DEFAULT_ED_SWEEP_DBM)


def ed_decision(energies: Iterable[float], threshold: float) -> int:
    """
    Transmit iff the total sensed energy is strictly below the threshold.

    Args:
        energies: Sensed energies in watts (>= 0)
        threshold: Threshold in watts

    Returns:
        1 to transmit, 0 to stay silent
    """
    values = np.asarray(list(energies), dtype=float)
    if np.any(values < 0):
        raise ValueError("energies must be non-negative")
    return int(float(np.sum(values)) < threshold)


class EdPolicy(Policy):
    """Fixed-threshold energy detection with genie modulation."""

    genie_modulation = True

    def __init__(self, threshold_dbm: float = -72.0):
        if not ED_MIN_DBM <= threshold_dbm <= ED_MAX_DBM:
            raise ConfigurationError(
                f"ED threshold {threshold_dbm} dBm outside [{ED_MIN_DBM}, {ED_MAX_DBM}] dBm"
            )
        self.threshold_dbm = float(threshold_dbm)
        self.threshold_w = dbm_to_watts(threshold_dbm)

    def act(self, bs: int, observation: ConObservation) -> Decision:
        return Decision(ed_decision((e for _, e in observation.sensed), self.threshold_w))

    def __repr__(self) -> str:
        return f"EdPolicy({self.threshold_dbm:g} dBm)"


@dataclass
class AdaptiveEdResult:
    """Outcome of a threshold sweep on one configuration."""
    best_threshold_dbm: float
    best_reward: float
    rewards: Dict[float, float] = field(default_factory=dict)  # threshold -> mean discounted reward


def evaluate_policy(
    env: SpectrumSharingEnv,
    configuration: UeConfiguration,
    policy: Policy,
    length: int,
    gamma: float,
    seed: int,
    episodes: int = 1,
    first_episode: int = 0,
) -> float:
    """Mean discounted cumulative reward of a policy over fixed channel seeds."""
    total = 0.0
    for episode in range(first_episode, first_episode + episodes):
        state = env.reset(configuration, seed, episode)
        total += env.generate_episode(state, policy, length).cumulative_reward(gamma)
    return total / episodes


def adaptive_ed(
    env: SpectrumSharingEnv,
    configuration: UeConfiguration,
    thresholds_dbm: Optional[Sequence[float]] = None,
    episodes_per_threshold: int = 1,
    gamma: float = 0.99,
    length: int = 100,
    seed: int = 0,
    first_episode: int = 0,
) -> AdaptiveEdResult:
    """
    Genie sweep: the ED threshold maximizing sum_n gamma^n r[n] for a configuration.

    Every threshold is evaluated on the same channel realizations. Ties keep the
    earliest threshold of the sweep.

    Args:
        env: Environment of the layout
        configuration: UE placement to tune for
        thresholds_dbm: Candidate thresholds (default -22..-92 dBm in 5 dB steps)
        episodes_per_threshold: Episodes averaged per threshold
        gamma: Discount factor
        length: Episode length L
        seed: Root seed of the channel streams
        first_episode: Index of the first episode stream

    Returns:
        AdaptiveEdResult
    """
    thresholds = list(DEFAULT_ED_SWEEP_DBM if thresholds_dbm is None else thresholds_dbm)
    if not thresholds:
        raise ConfigurationError("adaptive_ed needs at least one threshold")

    rewards: Dict[float, float] = {}
    best_threshold, best_reward = thresholds[0], -np.inf
    for threshold in thresholds:
        reward = evaluate_policy(
            env, configuration, EdPolicy(threshold), length, gamma, seed,
            episodes_per_threshold, first_episode,
        )
        rewards[float(threshold)] = reward
        if reward > best_reward:
            best_threshold, best_reward = threshold, reward

    logger.debug(f"Adaptive ED picked {best_threshold} dBm (reward {best_reward:.4f})")
    return AdaptiveEdResult(float(best_threshold), float(best_reward), rewards)
