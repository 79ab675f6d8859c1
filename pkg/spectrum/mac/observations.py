"""
Observations, actions and environment state of the two-phase (EOS/CON)
contention process.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np

from spectrum.channel.fading import ChannelRealization
from spectrum.config import ExperimentConfig
from spectrum.exceptions import ContractViolation
from spectrum.modem.constellation import MOD_SCHEMES, ModScheme

NO_TX = 0
N_ACTIONS = len(MOD_SCHEMES) + 1  # NoTx plus one code per scheme

# Order carried by each action code; 0 for NoTx
ACTION_ORDERS = np.array([0] + [s.order for s in MOD_SCHEMES], dtype=int)


class Phase(str, Enum):
    """Where a BS is within a slot."""
    EOS = "eos"
    CON = "con"


class Decision(NamedTuple):
    """What a policy returns for one BS in one slot."""
    action: int
    probability: float = 1.0  # behaviour probability of the action


def check_action(code: int, binary: bool = False) -> int:
    """Validate an action code (binary=True: a transmit decision in {0, 1})."""
    upper = 2 if binary else N_ACTIONS
    if not isinstance(code, (int, np.integer)) or not 0 <= int(code) < upper:
        raise ContractViolation(f"Action {code!r} outside [0, {upper})")
    return int(code)


def action_scheme(code: int) -> Optional[ModScheme]:
    """Modulation scheme of an action code, None for NoTx."""
    code = check_action(code)
    return None if code == NO_TX else MOD_SCHEMES[code - 1]


def action_for_order(order: int) -> int:
    """Action code that transmits with the given modulation order."""
    matches = np.flatnonzero(ACTION_ORDERS == int(order))
    if order <= 0 or matches.size == 0:
        raise ContractViolation(f"No action transmits with order {order}")
    return int(matches[0])


@dataclass(frozen=True)
class EosObservation:
    """What BS i knows at the end of slot n-1 about its own UE."""
    xbar_prev: float  # bits/s
    signal_prev: float  # watts, 0 when BS i was silent
    interference_prev: float  # watts


@dataclass(frozen=True)
class ConObservation:
    """
    What BS i knows when its counter expires.

    `sensed` lists every earlier transmitter as (bs index, energy in watts),
    strongest first; `energies` is the view truncated to k_trunc entries that
    learning agents consume.
    """
    eos: EosObservation
    sensed: Tuple[Tuple[int, float], ...]
    counter: int
    n_bs: int
    k_trunc: int

    @property
    def energies(self) -> Tuple[Tuple[int, float], ...]:
        return self.sensed[: self.k_trunc]

    @property
    def total_energy(self) -> float:
        return float(sum(e for _, e in self.sensed))


@dataclass(frozen=True)
class GlobalEosState:
    """EOS information of every UE (previous slot)."""
    xbar_all: np.ndarray
    signal_all: np.ndarray
    interference_all: np.ndarray

    @property
    def n_bs(self) -> int:
        return int(self.xbar_all.shape[0])


@dataclass(frozen=True)
class RadioParams:
    """Link-budget constants of the data phase."""
    bandwidth_hz: float
    tx_power_w: float
    noise_power_w: float
    tau: float
    xbar_floor: float
    k_trunc: int
    carrier_ghz: float

    @classmethod
    def from_config(cls, config: ExperimentConfig, n_bs: int) -> "RadioParams":
        return cls(
            bandwidth_hz=config.bandwidth_hz,
            tx_power_w=config.tx_power_w,
            noise_power_w=config.noise_power_w,
            tau=config.tau,
            xbar_floor=config.xbar_floor,
            k_trunc=config.resolve_k_trunc(n_bs),
            carrier_ghz=config.carrier_ghz,
        )


@dataclass
class EnvState:
    """
    Mutable state of one episode.

    `slot` is the last completed slot (0 after the warm-up); `channel` and
    `counters` belong to the next slot.
    """
    xbar: np.ndarray
    counters: np.ndarray
    slot: int
    phase: Phase
    channel: ChannelRealization
    signal: np.ndarray  # S_j of the last completed slot
    interference: np.ndarray  # I_j of the last completed slot
    rates: np.ndarray  # R_j of the last completed slot
    initial_reward: float
    channel_rng: np.random.Generator = field(repr=False)
    contention_rng: np.random.Generator = field(repr=False)
    committed: Optional[np.ndarray] = None  # action codes of the current slot

    @property
    def n_bs(self) -> int:
        return int(self.xbar.shape[0])

    def eos_observation(self, bs: int) -> EosObservation:
        return EosObservation(
            float(self.xbar[bs]), float(self.signal[bs]), float(self.interference[bs])
        )

    def global_eos_state(self) -> GlobalEosState:
        return GlobalEosState(self.xbar.copy(), self.signal.copy(), self.interference.copy())
