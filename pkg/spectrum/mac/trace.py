"""
Episode traces - everything both trainers and the benchmark reports need
from an L-slot rollout. Row 0 is the warm-up slot; decisions occupy rows
1..L-1.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from spectrum.mac.observations import ConObservation, EosObservation, GlobalEosState
from spectrum.utils.serialization import TRACE_SCHEMA, write_jsonl

logger = logging.getLogger(__name__)


@dataclass
class EpisodeTrace:
    """Per-slot arrays of one episode (L rows, N BSs, k energy slots)."""
    xbar_prev: np.ndarray  # (L, N) X_j[n-1]; row 0 holds zeros
    signal_prev: np.ndarray  # (L, N)
    interference_prev: np.ndarray  # (L, N)
    counters: np.ndarray  # (L, N) int
    energy_index: np.ndarray  # (L, N, k) int, -1 where empty
    energy_value: np.ndarray  # (L, N, k) watts
    actions: np.ndarray  # (L, N) int action codes actually played
    behavior_prob: np.ndarray  # (L, N) probability of the played code
    rates: np.ndarray  # (L, N) bits/s
    sinr: np.ndarray  # (L, N) SINR of the serving link
    xbar: np.ndarray  # (L, N) X_j[n]
    rewards: np.ndarray  # (L,) common reward r[n]
    k_trunc: int
    config_hash: Optional[str] = None
    configuration_index: Optional[int] = None
    seed: Optional[int] = None

    @classmethod
    def allocate(cls, length: int, n_bs: int, k_trunc: int) -> "EpisodeTrace":
        def zeros(*shape, dtype=float):
            return np.zeros(shape, dtype=dtype)

        return cls(
            xbar_prev=zeros(length, n_bs),
            signal_prev=zeros(length, n_bs),
            interference_prev=zeros(length, n_bs),
            counters=zeros(length, n_bs, dtype=int),
            energy_index=np.full((length, n_bs, k_trunc), -1, dtype=int),
            energy_value=zeros(length, n_bs, k_trunc),
            actions=zeros(length, n_bs, dtype=int),
            behavior_prob=np.ones((length, n_bs)),
            rates=zeros(length, n_bs),
            sinr=zeros(length, n_bs),
            xbar=zeros(length, n_bs),
            rewards=zeros(length),
            k_trunc=k_trunc,
        )

    @property
    def length(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def n_bs(self) -> int:
        return int(self.xbar.shape[1])

    @property
    def final_xbar(self) -> np.ndarray:
        return self.xbar[-1]

    def con_observation(self, slot: int, bs: int) -> ConObservation:
        """Rebuild the (truncated) CON observation BS `bs` saw in `slot`."""
        valid = self.energy_index[slot, bs] >= 0
        sensed = tuple(
            (int(j), float(e))
            for j, e in zip(self.energy_index[slot, bs][valid], self.energy_value[slot, bs][valid])
        )
        return ConObservation(
            eos=EosObservation(
                float(self.xbar_prev[slot, bs]),
                float(self.signal_prev[slot, bs]),
                float(self.interference_prev[slot, bs]),
            ),
            sensed=sensed,
            counter=int(self.counters[slot, bs]),
            n_bs=self.n_bs,
            k_trunc=self.k_trunc,
        )

    def global_eos_state(self, slot: int) -> GlobalEosState:
        return GlobalEosState(
            self.xbar_prev[slot].copy(), self.signal_prev[slot].copy(), self.interference_prev[slot].copy()
        )

    def cumulative_reward(self, gamma: float = 1.0) -> float:
        """sum_n gamma^n r[n], including the warm-up reward."""
        discounts = gamma ** np.arange(self.length)
        return float(np.dot(discounts, self.rewards))

    def summary(self, gamma: float = 1.0) -> Dict[str, Any]:
        """Headline numbers of the episode."""
        decisions = self.actions[1:] > 0
        n_decision_slots = max(decisions.shape[0], 1)
        return {
            "cumulative_reward": self.cumulative_reward(gamma),
            "sum_rate": float(np.sum(self.final_xbar)),
            "max_rate": float(np.max(self.final_xbar)),
            "log_utility": float(np.sum(np.log(self.final_xbar))),
            "transmit_rate": float(decisions.mean()) if decisions.size else 0.0,
            "collision_rate": float(np.sum(decisions.sum(axis=1) >= 2) / n_decision_slots),
        }

    def records(self):
        for n in range(self.length):
            yield {
                "slot": n,
                "actions": self.actions[n],
                "rates": self.rates[n],
                "reward": float(self.rewards[n]),
            }

    def to_jsonl(self, path: Path | str, gamma: float = 1.0) -> Path:
        """Export one record per slot (schema trace-v1)."""
        header = {
            "schema": TRACE_SCHEMA,
            "config_hash": self.config_hash,
            "n_bs": self.n_bs,
            "length": self.length,
            "configuration_index": self.configuration_index,
            "seed": self.seed,
            "summary": self.summary(gamma),
        }
        return write_jsonl(path, header, self.records())
