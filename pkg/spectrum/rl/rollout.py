"""
Shared machinery of both trainers: episode-batch generation from read-only
parameter snapshots, windowed recurrent evaluation with hidden-state
checkpoints, optimizer steps and per-iteration metrics.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from spectrum.channel.layout import ConfigurationPool
from spectrum.config import ExperimentConfig
from spectrum.mac.env import SpectrumSharingEnv
from spectrum.mac.trace import EpisodeTrace
from spectrum.neural.network import ForwardResult, Network, gradients
from spectrum.neural.optimizer import clip_by_global_norm
from spectrum.rl.agents import Agent, AgentSet, NetSlot
from spectrum.rl.features import FeatureScaler
from spectrum.rl.policies import ActionMode, RecurrentActorPolicy
from spectrum.utils.rng import stream

logger = logging.getLogger(__name__)

METRIC_FIELDS = (
    "iteration",
    "mean_cum_reward",
    "sum_rate",
    "max_rate",
    "log_utility",
    "collision_rate",
    "epsilon",
    "samples",
    "loss_q_con",
    "loss_q_eos",
    "loss_policy",
    "loss_v_con",
    "loss_v_eos",
    "entropy",
    "ratio_deviation",
)


@dataclass
class EpisodeBatch:
    """N_batch traces of one iteration."""
    traces: List[EpisodeTrace]
    configuration_indices: List[int]
    iteration: int

    @property
    def samples(self) -> int:
        return sum(trace.length for trace in self.traces)

    @property
    def decision_steps(self) -> int:
        return self.traces[0].length - 1 if self.traces else 0

    def rewards(self) -> np.ndarray:
        """(T, B) common rewards of the decision slots."""
        return np.stack([trace.rewards[1:] for trace in self.traces], axis=1)

    def actions(self, bs: int) -> np.ndarray:
        return np.stack([trace.actions[1:, bs] for trace in self.traces], axis=1)

    def behavior_prob(self, bs: int) -> np.ndarray:
        return np.stack([trace.behavior_prob[1:, bs] for trace in self.traces], axis=1)


@dataclass
class IterationMetrics:
    """One row of the metrics stream."""
    iteration: int
    mean_cum_reward: float
    sum_rate: float
    max_rate: float
    log_utility: float
    collision_rate: float
    epsilon: float = 0.0
    samples: int = 0
    loss_q_con: Optional[float] = None
    loss_q_eos: Optional[float] = None
    loss_policy: Optional[float] = None
    loss_v_con: Optional[float] = None
    loss_v_eos: Optional[float] = None
    entropy: Optional[float] = None
    ratio_deviation: Optional[float] = None

    def to_row(self) -> dict:
        return {key: ("" if value is None else value) for key, value in asdict(self).items()}


def generate_batch(
    env: SpectrumSharingEnv,
    pool: ConfigurationPool,
    agents: AgentSet,
    scaler: FeatureScaler,
    config: ExperimentConfig,
    iteration: int,
    mode: ActionMode,
    epsilon: float = 0.0,
    seed: Optional[int] = None,
) -> EpisodeBatch:
    """
    Roll out N_batch fresh episodes with the current parameters.

    Configurations are drawn from the training part of the pool; episode b of
    iteration i uses channel streams with index i * N_batch + b, so every
    episode of a run sees independent fading.
    """
    seed = config.seed if seed is None else seed
    indices = pool.training_indices(
        stream(seed, "batch", iteration), config.n_batch, reserved=config.validation_configurations
    )
    traces = []
    for b, index in enumerate(indices):
        state = env.reset(pool[index], seed, iteration * config.n_batch + b)
        policy = RecurrentActorPolicy(agents, scaler, mode, stream(seed, "policy", iteration, b), epsilon)
        trace = env.generate_episode(state, policy, config.episode_length)
        trace.config_hash = config.config_hash()
        trace.configuration_index = index
        trace.seed = seed
        traces.append(trace)
    return EpisodeBatch(traces, list(indices), iteration)


def batch_metrics(batch: EpisodeBatch, gamma: float, epsilon: float = 0.0) -> IterationMetrics:
    summaries = [trace.summary(gamma) for trace in batch.traces]

    def mean(key: str) -> float:
        return float(np.mean([s[key] for s in summaries]))

    return IterationMetrics(
        iteration=batch.iteration,
        mean_cum_reward=mean("cumulative_reward"),
        sum_rate=mean("sum_rate"),
        max_rate=mean("max_rate"),
        log_utility=mean("log_utility"),
        collision_rate=mean("collision_rate"),
        epsilon=epsilon,
        samples=batch.samples,
    )


# Windowed evaluation


@dataclass
class WindowedOutputs:
    """Outputs over a whole sequence plus the hidden state entering each window."""
    raw: np.ndarray
    outputs: np.ndarray
    starts: List[int]
    hiddens: List[np.ndarray] = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.raw[..., 0]

    def windows(self) -> List[Tuple[slice, np.ndarray]]:
        steps = self.raw.shape[0]
        bounds = self.starts[1:] + [steps]
        return [(slice(s, e), h) for s, e, h in zip(self.starts, bounds, self.hiddens)]


def run_windows(network: Network, params: np.ndarray, inputs: np.ndarray, window: int) -> WindowedOutputs:
    """
    Forward a (T, B, d) sequence window by window, threading the hidden state.

    Gives the same outputs as a single forward pass and records the hidden
    state at each window start for truncated backpropagation.
    """
    steps, batch = inputs.shape[:2]
    starts = list(range(0, steps, max(int(window), 1)))
    raw = np.empty((steps, batch, network.spec.output_dim))
    outputs = np.empty_like(raw)
    hiddens = []
    h = network.initial_hidden(batch)
    for s in starts:
        hiddens.append(h)
        result = network.forward(params, inputs[s: s + window], h)
        raw[s: s + window] = result.raw
        outputs[s: s + window] = result.outputs
        h = result.hidden
    return WindowedOutputs(raw, outputs, starts, hiddens)


def apply_gradient(slot: NetSlot, grad: np.ndarray, config: ExperimentConfig) -> float:
    """Clip, step the optimizer and return the pre-clip gradient norm."""
    grad, norm = clip_by_global_norm(grad, config.max_grad_norm)
    slot.params = slot.optimizer.step(slot.params, grad, config.learning_rate)
    return norm


def train_window(
    slot: NetSlot,
    inputs: np.ndarray,
    hidden: np.ndarray,
    loss_fn: Callable[[ForwardResult], Tuple[float, np.ndarray]],
    config: ExperimentConfig,
) -> float:
    """One optimizer step of one network on one window; returns the loss."""
    loss, grad = gradients(slot.network, slot.params, inputs, loss_fn, hidden)
    apply_gradient(slot, grad, config)
    return loss


def gather(per_bs: Callable[[int], np.ndarray], agent: Agent) -> np.ndarray:
    """Concatenate per-BS (T, B, ...) arrays of the BSs an agent serves along the batch axis."""
    return np.concatenate([per_bs(bs) for bs in agent.bs_indices], axis=1)


def eos_inputs(scaler: FeatureScaler, traces: Sequence[EpisodeTrace], agent: Agent, centralized: bool) -> np.ndarray:
    if centralized:
        return gather(lambda bs: scaler.global_eos_inputs(traces), agent)
    return gather(lambda bs: scaler.eos_inputs(traces, bs), agent)


def mse(values: np.ndarray, targets: np.ndarray, coef: float = 1.0) -> Tuple[float, np.ndarray]:
    """coef * mean squared error and its gradient w.r.t. values."""
    diff = values - targets
    n = max(diff.size, 1)
    return coef * float(np.sum(diff * diff)) / n, 2.0 * coef * diff / n
