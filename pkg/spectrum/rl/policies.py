"""Decentralized actor policies backed by the CON networks of an AgentSet."""

import logging
from enum import Enum
from typing import Dict

import numpy as np

from spectrum.mac.env import Policy
from spectrum.mac.observations import N_ACTIONS, ConObservation, Decision
from spectrum.neural.network import HeadKind
from spectrum.rl.agents import AgentSet
from spectrum.rl.features import FeatureScaler

logger = logging.getLogger(__name__)


class ActionMode(str, Enum):
    """How an actor turns network outputs into an action."""
    SAMPLE = "sample"  # draw from the softmax policy
    GREEDY = "greedy"  # argmax of probabilities or Q-values
    EPSILON = "epsilon"  # epsilon-greedy over Q-values


class RecurrentActorPolicy(Policy):
    """
    Runs each BS's actor one step at a time, threading its recurrent state
    through the episode. The actor only ever sees the BS's own ConObservation.
    """

    def __init__(
        self,
        agents: AgentSet,
        scaler: FeatureScaler,
        mode: ActionMode = ActionMode.GREEDY,
        rng: np.random.Generator | None = None,
        epsilon: float = 0.0,
    ):
        self.agents = agents
        self.scaler = scaler
        self.mode = ActionMode(mode)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.epsilon = float(epsilon)
        self._hidden: Dict[int, np.ndarray] = {}

        heads = {agent.actor.network.spec.head for agent in agents}
        if self.mode == ActionMode.SAMPLE and heads != {HeadKind.SOFTMAX}:
            raise ValueError("Sampling needs softmax actors")
        if self.mode == ActionMode.EPSILON and not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")

    def reset(self, n_bs: int) -> None:
        self._hidden = {
            bs: self.agents[bs].actor.network.initial_hidden(1) for bs in range(n_bs)
        }

    def outputs(self, bs: int, observation: ConObservation) -> np.ndarray:
        """Actor outputs (probabilities or Q-values) for one observation; advances the hidden state."""
        slot = self.agents[bs].actor
        x = self.scaler.con_vector(observation)[None, None, :]
        result = slot.network.forward(slot.params, x, self._hidden.get(bs))
        self._hidden[bs] = result.hidden
        return result.outputs[0, 0]

    def act(self, bs: int, observation: ConObservation) -> Decision:
        out = self.outputs(bs, observation)
        best = int(np.argmax(out))

        if self.mode == ActionMode.SAMPLE:
            action = int(self.rng.choice(N_ACTIONS, p=out))
            return Decision(action, float(out[action]))
        if self.mode == ActionMode.EPSILON:
            explore = self.rng.random() < self.epsilon
            action = int(self.rng.integers(N_ACTIONS)) if explore else best
            prob = self.epsilon / N_ACTIONS + (1.0 - self.epsilon) * (action == best)
            return Decision(action, float(prob))

        prob = float(out[best]) if self.agents[bs].actor.network.spec.head == HeadKind.SOFTMAX else 1.0
        return Decision(best, prob)

    def __repr__(self) -> str:
        return f"RecurrentActorPolicy(mode={self.mode.value}, epsilon={self.epsilon})"
