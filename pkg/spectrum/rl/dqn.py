"""
Spectrum-sharing DQN.

Each BS holds Q_con(o_con, a) and a state value Q_eos(o_eos). Labels follow the
two-state sampled updates, with half a discount step per state transition:

    Q_eos[n] <- sqrt(gamma) * max_a Q_con[n, a]
    Q_con[n, a_n] <- r[n] + sqrt(gamma) * Q_eos[n + 1]      (0 after the last slot)

Labels are computed once per iteration from the parameters that generated the
episodes; one epoch of MSE descent then sweeps the batch in BPTT windows.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from spectrum.channel.layout import ConfigurationPool
from spectrum.config import DaccMode, ExperimentConfig
from spectrum.mac.env import SpectrumSharingEnv
from spectrum.mac.trace import EpisodeTrace
from spectrum.rl.agents import AgentSet, DqnAgent
from spectrum.rl.features import FeatureScaler
from spectrum.rl.policies import ActionMode
from spectrum.rl.rollout import (
    EpisodeBatch,
    IterationMetrics,
    batch_metrics,
    eos_inputs,
    gather,
    generate_batch,
    mse,
    run_windows,
    train_window,
)

logger = logging.getLogger(__name__)


def dqn_targets(
    q_con: np.ndarray, q_eos: np.ndarray, rewards: np.ndarray, gamma: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Labels for both heads along the time axis.

    Args:
        q_con: (T, ..., 8) action values at the CON state of each decision slot
        q_eos: (T, ...) values at the EOS state of each decision slot
        rewards: (T, ...) reward of each decision slot
        gamma: Discount factor

    Returns:
        (EOS labels, CON labels for the taken action), both shaped like q_eos
    """
    root = np.sqrt(gamma)
    q_eos = np.asarray(q_eos, dtype=float)
    next_eos = np.zeros_like(q_eos)
    next_eos[:-1] = q_eos[1:]
    y_eos = root * np.max(q_con, axis=-1)
    y_con = np.asarray(rewards, dtype=float) + root * next_eos
    return y_eos, y_con


def dqn_labels(
    trace: EpisodeTrace, agent: DqnAgent, bs: int, scaler: FeatureScaler, gamma: float
) -> Tuple[np.ndarray, np.ndarray]:
    """(EOS labels, CON labels) of one BS over the decision slots of a trace."""
    centralized = agent.dacc_mode == DaccMode.CENTRALIZED
    traces = [trace]
    x_eos = scaler.global_eos_inputs(traces) if centralized else scaler.eos_inputs(traces, bs)
    x_con = scaler.con_inputs(traces, bs)
    q_eos = agent.q_eos.network.forward(agent.q_eos.params, x_eos).values[:, 0]
    q_con = agent.q_con.network.forward(agent.q_con.params, x_con).raw[:, 0]
    return dqn_targets(q_con, q_eos, trace.rewards[1:], gamma)


def _taken_action_loss(actions: np.ndarray, labels: np.ndarray):
    def loss_fn(result):
        q_taken = np.take_along_axis(result.raw, actions[..., None], axis=-1)[..., 0]
        loss, d_taken = mse(q_taken, labels)
        d_raw = np.zeros_like(result.raw)
        np.put_along_axis(d_raw, actions[..., None], d_taken[..., None], axis=-1)
        return loss, d_raw
    return loss_fn


def _value_loss(labels: np.ndarray):
    def loss_fn(result):
        loss, d_values = mse(result.values, labels)
        return loss, d_values[..., None]
    return loss_fn


def update_dqn(
    agents: AgentSet, batch: EpisodeBatch, scaler: FeatureScaler, config: ExperimentConfig
) -> Dict[str, float]:
    """One epoch of MSE descent on both heads of every agent; returns mean losses."""
    traces = batch.traces
    if batch.decision_steps < 1:
        return {"loss_q_con": 0.0, "loss_q_eos": 0.0}
    rewards = batch.rewards()
    losses = {"loss_q_con": [], "loss_q_eos": []}

    for agent in agents:
        centralized = agent.dacc_mode == DaccMode.CENTRALIZED
        x_con = gather(lambda bs: scaler.con_inputs(traces, bs), agent)
        x_eos = eos_inputs(scaler, traces, agent, centralized)
        actions = gather(batch.actions, agent)
        r = np.concatenate([rewards] * len(agent.bs_indices), axis=1)

        con = run_windows(agent.q_con.network, agent.q_con.params, x_con, config.bptt_window)
        eos = run_windows(agent.q_eos.network, agent.q_eos.params, x_eos, config.bptt_window)
        y_eos, y_con = dqn_targets(con.raw, eos.values, r, config.gamma)

        for (window, h_con), (_, h_eos) in zip(con.windows(), eos.windows()):
            losses["loss_q_con"].append(train_window(
                agent.q_con, x_con[window], h_con, _taken_action_loss(actions[window], y_con[window]), config
            ))
            losses["loss_q_eos"].append(train_window(
                agent.q_eos, x_eos[window], h_eos, _value_loss(y_eos[window]), config
            ))

    return {key: float(np.mean(values)) for key, values in losses.items()}


def dqn_train_iteration(
    env: SpectrumSharingEnv,
    pool: ConfigurationPool,
    agents: AgentSet,
    scaler: FeatureScaler,
    config: ExperimentConfig,
    iteration: int,
    seed: Optional[int] = None,
) -> IterationMetrics:
    """
    Generate N_batch fresh epsilon-greedy episodes and run one epoch of updates.

    Raises:
        NonFiniteLossError: a loss diverged
    """
    epsilon = config.epsilon_at(iteration)
    batch = generate_batch(env, pool, agents, scaler, config, iteration, ActionMode.EPSILON, epsilon, seed)
    metrics = batch_metrics(batch, config.gamma, epsilon)
    losses = update_dqn(agents, batch, scaler, config)
    metrics.loss_q_con = losses["loss_q_con"]
    metrics.loss_q_eos = losses["loss_q_eos"]
    logger.info(
        f"DQN iteration {iteration}: reward {metrics.mean_cum_reward:.4f}, "
        f"epsilon {epsilon:.3f}, loss_q_con {metrics.loss_q_con:.4g}"
    )
    return metrics
