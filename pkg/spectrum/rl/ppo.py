"""
Spectrum-sharing PPO.

Every decision slot contributes two states to the value chain: EOS (no action,
no reward) then CON (action, reward). With half a discount step per state the
temporal-difference residuals are

    d_eos[n] = sqrt(gamma) * V_con[n] - V_eos[n]
    d_con[n] = r[n] + sqrt(gamma) * V_eos[n + 1] - V_con[n]      (V_eos = 0 after the last slot)

and the lambda-returns accumulate them along E0, C0, E1, C1, ... with decay
sqrt(gamma) * lambda per state. The CON advantage drives a clipped surrogate;
both critics regress on their lambda-returns.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from spectrum.channel.layout import ConfigurationPool
from spectrum.config import DaccMode, ExperimentConfig
from spectrum.exceptions import ContractViolation
from spectrum.mac.env import SpectrumSharingEnv
from spectrum.mac.trace import EpisodeTrace
from spectrum.rl.agents import AgentSet, PpoAgent
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


def gae_chain(
    rewards: np.ndarray,
    v_eos: np.ndarray,
    v_con: np.ndarray,
    gamma: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Lambda-returns over the alternating EOS/CON chain.

    Args:
        rewards: (T, ...) reward of each decision slot
        v_eos: (T, ...) EOS critic outputs
        v_con: (T, ...) CON critic outputs
        gamma: Discount factor
        lam: GAE lambda

    Returns:
        (EOS targets, CON targets, CON advantages), each shaped like rewards
    """
    rewards = np.asarray(rewards, dtype=float)
    v_eos = np.asarray(v_eos, dtype=float)
    v_con = np.asarray(v_con, dtype=float)
    root = np.sqrt(gamma)
    decay = root * lam

    adv_eos = np.zeros_like(rewards)
    adv_con = np.zeros_like(rewards)
    next_adv = np.zeros(rewards.shape[1:])
    next_v_eos = np.zeros(rewards.shape[1:])
    for n in range(rewards.shape[0] - 1, -1, -1):
        d_con = rewards[n] + root * next_v_eos - v_con[n]
        adv_con[n] = d_con + decay * next_adv
        d_eos = root * v_con[n] - v_eos[n]
        adv_eos[n] = d_eos + decay * adv_con[n]
        next_adv = adv_eos[n]
        next_v_eos = v_eos[n]

    return v_eos + adv_eos, v_con + adv_con, adv_con


def gae_targets(
    trace: EpisodeTrace, agent: PpoAgent, bs: int, scaler: FeatureScaler, gamma: float, lam: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(EOS targets, CON targets, CON advantages) of one BS over the decision slots of a trace."""
    centralized = agent.dacc_mode == DaccMode.CENTRALIZED
    traces = [trace]
    x_eos = scaler.global_eos_inputs(traces) if centralized else scaler.eos_inputs(traces, bs)
    x_con = scaler.con_inputs(traces, bs, centralized)
    v_eos = agent.v_eos.network.forward(agent.v_eos.params, x_eos).values[:, 0]
    v_con = agent.v_con.network.forward(agent.v_con.params, x_con).values[:, 0]
    return gae_chain(trace.rewards[1:], v_eos, v_con, gamma, lam)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass
class PolicyLoss:
    loss: float
    surrogate: float
    entropy: float
    ratio_deviation: float
    d_logits: np.ndarray


def policy_loss(
    logits: np.ndarray,
    actions: np.ndarray,
    old_probs: np.ndarray,
    advantages: np.ndarray,
    clip: float = 0.2,
    entropy_coef: float = 0.01,
) -> PolicyLoss:
    """
    Clipped surrogate minus entropy bonus, averaged over samples.

    Args:
        logits: (..., 8) policy logits
        actions: (...) taken action codes
        old_probs: (...) behaviour probabilities recorded at generation
        advantages: (...) CON advantages
        clip: Ratio clip epsilon
        entropy_coef: Entropy bonus weight

    Raises:
        ContractViolation: a recorded behaviour probability is not positive
    """
    old_probs = np.asarray(old_probs, dtype=float)
    if np.any(old_probs <= 0.0) or not np.all(np.isfinite(old_probs)):
        raise ContractViolation("Behaviour probabilities of taken actions must be positive")
    actions = np.asarray(actions, dtype=int)
    n = max(actions.size, 1)

    logp = log_softmax(logits)
    probs = np.exp(logp)
    logp_taken = np.take_along_axis(logp, actions[..., None], axis=-1)[..., 0]
    ratio = np.exp(logp_taken) / old_probs
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    surrogate = np.minimum(surr1, surr2)
    entropy = -np.sum(probs * logp, axis=-1)

    loss = -float(np.sum(surrogate)) / n - entropy_coef * float(np.sum(entropy)) / n

    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, actions[..., None], 1.0, axis=-1)
    active = (surr1 <= surr2).astype(float)
    d_surr = -(advantages * ratio * active)[..., None] * (onehot - probs) / n
    d_entropy = entropy_coef * probs * (logp + entropy[..., None]) / n

    return PolicyLoss(
        loss=loss,
        surrogate=float(np.sum(surrogate)) / n,
        entropy=float(np.sum(entropy)) / n,
        ratio_deviation=float(np.max(np.abs(ratio - 1.0))) if ratio.size else 0.0,
        d_logits=d_surr + d_entropy,
    )


@dataclass
class PpoLoss:
    """Total loss of one agent on a batch with its components."""
    total: float
    policy: PolicyLoss
    value_con: float
    value_eos: float


def ppo_loss(
    logits: np.ndarray,
    actions: np.ndarray,
    old_probs: np.ndarray,
    advantages: np.ndarray,
    v_con: np.ndarray,
    target_con: np.ndarray,
    v_eos: np.ndarray,
    target_eos: np.ndarray,
    clip: float = 0.2,
    value_coef: float = 0.5,
    entropy_coef: float = 0.01,
) -> PpoLoss:
    """Clipped surrogate + value_coef * MSE per critic - entropy_coef * entropy."""
    policy = policy_loss(logits, actions, old_probs, advantages, clip, entropy_coef)
    value_con, _ = mse(np.asarray(v_con, dtype=float), target_con, value_coef)
    value_eos, _ = mse(np.asarray(v_eos, dtype=float), target_eos, value_coef)
    return PpoLoss(policy.loss + value_con + value_eos, policy, value_con, value_eos)


def normalize(advantages: np.ndarray) -> np.ndarray:
    if advantages.size == 0:
        return advantages
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def _policy_loss_fn(actions, old_probs, advantages, config: ExperimentConfig, record: Dict[str, list]):
    def loss_fn(result):
        terms = policy_loss(result.raw, actions, old_probs, advantages, config.ppo_clip, config.entropy_coef)
        record["entropy"].append(terms.entropy)
        record["ratio"].append(terms.ratio_deviation)
        return terms.loss, terms.d_logits
    return loss_fn


def _value_loss_fn(targets, coef: float):
    def loss_fn(result):
        loss, d_values = mse(result.values, targets, coef)
        return loss, d_values[..., None]
    return loss_fn


def update_ppo(
    agents: AgentSet, batch: EpisodeBatch, scaler: FeatureScaler, config: ExperimentConfig
) -> Dict[str, float]:
    """
    One epoch over the batch for every agent.

    Critic outputs and advantages come from the parameters that generated the
    batch; the epoch then takes one step per BPTT window on each network.
    """
    traces = batch.traces
    empty = {"loss_policy": 0.0, "loss_v_con": 0.0, "loss_v_eos": 0.0, "entropy": 0.0, "ratio_deviation": 0.0}
    if batch.decision_steps < 1:
        return empty
    rewards = batch.rewards()
    record: Dict[str, list] = {"policy": [], "v_con": [], "v_eos": [], "entropy": [], "ratio": []}
    first_ratio = []

    for agent in agents:
        centralized = agent.dacc_mode == DaccMode.CENTRALIZED
        x_pi = gather(lambda bs: scaler.con_inputs(traces, bs), agent)
        x_v_con = gather(lambda bs: scaler.con_inputs(traces, bs, centralized), agent)
        x_v_eos = eos_inputs(scaler, traces, agent, centralized)
        actions = gather(batch.actions, agent)
        old_probs = gather(batch.behavior_prob, agent)
        r = np.concatenate([rewards] * len(agent.bs_indices), axis=1)

        pi = run_windows(agent.pi_con.network, agent.pi_con.params, x_pi, config.bptt_window)
        v_con = run_windows(agent.v_con.network, agent.v_con.params, x_v_con, config.bptt_window)
        v_eos = run_windows(agent.v_eos.network, agent.v_eos.params, x_v_eos, config.bptt_window)
        target_eos, target_con, advantages = gae_chain(r, v_eos.values, v_con.values, config.gamma, config.gae_lambda)
        if config.normalize_advantages:
            advantages = normalize(advantages)

        for k, ((window, h_pi), (_, h_con), (_, h_eos)) in enumerate(
            zip(pi.windows(), v_con.windows(), v_eos.windows())
        ):
            record["policy"].append(train_window(
                agent.pi_con, x_pi[window], h_pi,
                _policy_loss_fn(actions[window], old_probs[window], advantages[window], config, record),
                config,
            ))
            if k == 0:
                first_ratio.append(record["ratio"][-1])
            record["v_con"].append(train_window(
                agent.v_con, x_v_con[window], h_con, _value_loss_fn(target_con[window], config.value_coef), config
            ))
            record["v_eos"].append(train_window(
                agent.v_eos, x_v_eos[window], h_eos, _value_loss_fn(target_eos[window], config.value_coef), config
            ))

    return {
        "loss_policy": float(np.mean(record["policy"])),
        "loss_v_con": float(np.mean(record["v_con"])),
        "loss_v_eos": float(np.mean(record["v_eos"])),
        "entropy": float(np.mean(record["entropy"])),
        "ratio_deviation": float(np.max(first_ratio)),
    }


def ppo_train_iteration(
    env: SpectrumSharingEnv,
    pool: ConfigurationPool,
    agents: AgentSet,
    scaler: FeatureScaler,
    config: ExperimentConfig,
    iteration: int,
    seed: Optional[int] = None,
) -> IterationMetrics:
    """
    Generate N_batch on-policy episodes by sampling pi_con and run one epoch.

    Raises:
        NonFiniteLossError: a loss diverged
    """
    batch = generate_batch(env, pool, agents, scaler, config, iteration, ActionMode.SAMPLE, seed=seed)
    metrics = batch_metrics(batch, config.gamma)
    losses = update_ppo(agents, batch, scaler, config)
    for key, value in losses.items():
        setattr(metrics, key, value)
    logger.info(
        f"PPO iteration {iteration}: reward {metrics.mean_cum_reward:.4f}, "
        f"sum rate {metrics.sum_rate:.4g}, entropy {metrics.entropy:.3f}"
    )
    return metrics
