"""
Per-BS learning agents and the decentralized-actor / centralized-critic switch.

A DQN agent owns Q_con (recurrent, one value per action) and Q_eos (feed-forward
scalar). A PPO agent owns pi_con (recurrent softmax), V_con (recurrent scalar)
and V_eos (feed-forward scalar). Only the CON actor is evaluated while acting.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from spectrum.config import Algorithm, DaccMode, ExperimentConfig
from spectrum.exceptions import ConfigurationError
from spectrum.mac.observations import N_ACTIONS
from spectrum.neural.checkpoint import NetworkState
from spectrum.neural.network import HeadKind, NetSpec, Network
from spectrum.neural.optimizer import Adam
from spectrum.rl.features import FeatureScaler
from spectrum.utils.rng import stream

logger = logging.getLogger(__name__)


@dataclass
class NetSlot:
    """A network with its parameters and optimizer."""
    network: Network
    params: np.ndarray
    optimizer: Adam

    @classmethod
    def create(cls, spec: NetSpec, name: str, rng: np.random.Generator) -> "NetSlot":
        network = Network(spec, name)
        return cls(network, network.init_params(rng), Adam(network.size))

    def state(self) -> NetworkState:
        return NetworkState(self.network.spec, self.params.copy(), self.optimizer)

    @classmethod
    def from_state(cls, state: NetworkState, name: str) -> "NetSlot":
        network = Network(state.spec, name)
        optimizer = state.optimizer or Adam(network.size)
        return cls(network, state.params.copy(), optimizer)


@dataclass
class Agent:
    """Networks of one BS (or of a group of BSs sharing weights)."""
    algorithm: Algorithm
    nets: Dict[str, NetSlot]
    dacc_mode: DaccMode = DaccMode.LOCAL
    bs_indices: List[int] = field(default_factory=list)

    @property
    def actor_key(self) -> str:
        return "pi_con" if self.algorithm == Algorithm.PPO else "q_con"

    @property
    def actor(self) -> NetSlot:
        return self.nets[self.actor_key]

    @property
    def critic_keys(self) -> List[str]:
        if self.algorithm == Algorithm.PPO:
            return ["v_con", "v_eos"]
        return ["q_eos"]


class DqnAgent(Agent):
    """Q_con / Q_eos pair of one BS."""

    @property
    def q_con(self) -> NetSlot:
        return self.nets["q_con"]

    @property
    def q_eos(self) -> NetSlot:
        return self.nets["q_eos"]


class PpoAgent(Agent):
    """pi_con / V_con / V_eos triple of one BS."""

    @property
    def pi_con(self) -> NetSlot:
        return self.nets["pi_con"]

    @property
    def v_con(self) -> NetSlot:
        return self.nets["v_con"]

    @property
    def v_eos(self) -> NetSlot:
        return self.nets["v_eos"]


def network_specs(
    algorithm: Algorithm,
    n_bs: int,
    k_trunc: int,
    dacc_mode: DaccMode,
    hidden_dims: Sequence[int] = (64, 64),
    recurrent_width: int = 32,
) -> Dict[str, NetSpec]:
    """NetSpecs of an agent; critics see the global EOS state under DaccMode.CENTRALIZED."""
    centralized = dacc_mode == DaccMode.CENTRALIZED
    hidden = tuple(hidden_dims)
    actor_in = FeatureScaler.con_dim(n_bs, k_trunc, centralized=False)
    eos_in = FeatureScaler.eos_dim(n_bs, centralized)
    if algorithm == Algorithm.PPO:
        return {
            "pi_con": NetSpec(actor_in, hidden, recurrent_width, HeadKind.SOFTMAX, N_ACTIONS),
            "v_con": NetSpec(
                FeatureScaler.con_dim(n_bs, k_trunc, centralized), hidden, recurrent_width, HeadKind.SCALAR, N_ACTIONS
            ),
            "v_eos": NetSpec(eos_in, hidden, 0, HeadKind.SCALAR, N_ACTIONS),
        }
    return {
        "q_con": NetSpec(actor_in, hidden, recurrent_width, HeadKind.QVECTOR, N_ACTIONS),
        "q_eos": NetSpec(eos_in, hidden, 0, HeadKind.SCALAR, N_ACTIONS),
    }


class AgentSet:
    """
    Agents of all BSs. Without weight sharing every BS has its own agent;
    with sharing one agent serves every BS.
    """

    def __init__(self, agents: List[Agent], n_bs: int, k_trunc: int):
        self.agents = agents
        self.n_bs = n_bs
        self.k_trunc = k_trunc
        self._by_bs: Dict[int, Agent] = {}
        for agent in agents:
            for bs in agent.bs_indices:
                self._by_bs[bs] = agent
        if sorted(self._by_bs) != list(range(n_bs)):
            raise ConfigurationError("Every BS must be served by exactly one agent")

    def __getitem__(self, bs: int) -> Agent:
        return self._by_bs[bs]

    def __iter__(self):
        return iter(self.agents)

    def __len__(self) -> int:
        return len(self.agents)

    @property
    def algorithm(self) -> Algorithm:
        return self.agents[0].algorithm

    @property
    def dacc_mode(self) -> DaccMode:
        return self.agents[0].dacc_mode

    def states(self) -> Dict[str, NetworkState]:
        """Flat name -> NetworkState map for checkpoints."""
        return {
            f"agent{k}.{key}": slot.state()
            for k, agent in enumerate(self.agents)
            for key, slot in agent.nets.items()
        }

    def load_states(self, states: Dict[str, NetworkState]) -> None:
        for k, agent in enumerate(self.agents):
            for key in list(agent.nets):
                name = f"agent{k}.{key}"
                if name not in states:
                    raise ConfigurationError(f"Checkpoint has no network {name}")
                if states[name].spec != agent.nets[key].network.spec:
                    raise ConfigurationError(f"Checkpoint network {name} has a different shape")
                agent.nets[key] = NetSlot.from_state(states[name], name)


def build_agents(config: ExperimentConfig, n_bs: int, seed: Optional[int] = None) -> AgentSet:
    """
    Create freshly initialized agents for a layout.

    Args:
        config: Experiment config (algorithm, DACC flag, widths, sharing flag)
        n_bs: Number of BSs
        seed: Initialization seed (defaults to config.seed)

    Returns:
        AgentSet
    """
    seed = config.seed if seed is None else seed
    k_trunc = config.resolve_k_trunc(n_bs)
    mode = DaccMode.CENTRALIZED if config.dacc else DaccMode.LOCAL
    specs = network_specs(config.algorithm, n_bs, k_trunc, mode, config.hidden_dims, config.recurrent_width)
    agent_cls = PpoAgent if config.algorithm == Algorithm.PPO else DqnAgent

    groups = [list(range(n_bs))] if config.share_weights else [[bs] for bs in range(n_bs)]
    agents: List[Agent] = []
    for k, group in enumerate(groups):
        rng = stream(seed, "init", k)
        nets = {key: NetSlot.create(spec, f"agent{k}.{key}", rng) for key, spec in specs.items()}
        agents.append(agent_cls(config.algorithm, nets, mode, group))

    logger.info(
        f"Agents initialized: {len(agents)} x {config.algorithm.value.upper()} "
        f"({mode.value} critics, k_trunc={k_trunc})"
    )
    return AgentSet(agents, n_bs, k_trunc)


def apply_dacc(agents: AgentSet, mode: DaccMode, seed: int = 0) -> AgentSet:
    """
    Switch critic inputs between local observations and the global EOS state.

    Actors are kept untouched; critics whose input width changes are
    re-initialized.

    Args:
        agents: Current agent set (modified in place)
        mode: DaccMode.LOCAL or DaccMode.CENTRALIZED
        seed: Seed for re-initialized critics

    Returns:
        The same AgentSet
    """
    mode = DaccMode(mode)
    for k, agent in enumerate(agents):
        if agent.dacc_mode == mode:
            continue
        actor = agent.actor.network.spec
        specs = network_specs(
            agent.algorithm, agents.n_bs, agents.k_trunc, mode, actor.hidden_dims, actor.recurrent_width
        )
        rng = stream(seed, "dacc", k)
        for key in agent.critic_keys:
            agent.nets[key] = NetSlot.create(specs[key], f"agent{k}.{key}", rng)
        agent.dacc_mode = mode
    logger.info(f"Critic inputs switched to {mode.value}")
    return agents
