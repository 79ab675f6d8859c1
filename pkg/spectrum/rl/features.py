"""
Network inputs built from observations.

Powers enter in dB, rates as log10, both through fixed affine constants from
the experiment config; the counter and BS indices enter as fractions of N.

Layouts:
    EOS local   (3):            rate, signal, interference
    EOS global  (3N):           rates of all UEs, signals, interferences
    CON         (3 + 3k + 1):   EOS local, k x (present, (j+1)/N, energy), counter/N
    CON critic  (3N + 3k + 1):  CON with the EOS part replaced by EOS global
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from spectrum.config import ExperimentConfig
from spectrum.mac.observations import ConObservation, GlobalEosState
from spectrum.mac.trace import EpisodeTrace

_MIN_POWER_W = 1e-20


@dataclass(frozen=True)
class FeatureScaler:
    """Affine normalization of powers and rates."""
    power_ref_dbm: float = -90.0
    power_scale_db: float = 30.0
    rate_ref_log10: float = 6.0
    rate_scale_log10: float = 2.0

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "FeatureScaler":
        return cls(
            config.feature_power_ref_dbm,
            config.feature_power_scale_db,
            config.feature_rate_ref_log10,
            config.feature_rate_scale_log10,
        )

    def power(self, watts) -> np.ndarray:
        dbm = 10.0 * np.log10(np.maximum(np.asarray(watts, dtype=float), _MIN_POWER_W)) + 30.0
        return (dbm - self.power_ref_dbm) / self.power_scale_db

    def rate(self, bits_per_s) -> np.ndarray:
        log_rate = np.log10(np.maximum(np.asarray(bits_per_s, dtype=float), 1.0))
        return (log_rate - self.rate_ref_log10) / self.rate_scale_log10

    # Dimensions

    @staticmethod
    def eos_dim(n_bs: int, centralized: bool = False) -> int:
        return 3 * n_bs if centralized else 3

    @staticmethod
    def con_dim(n_bs: int, k_trunc: int, centralized: bool = False) -> int:
        return FeatureScaler.eos_dim(n_bs, centralized) + 3 * k_trunc + 1

    # Single observations (acting)

    def eos_vector(self, xbar: float, signal: float, interference: float) -> np.ndarray:
        return np.array([self.rate(xbar), self.power(signal), self.power(interference)], dtype=float)

    def global_eos_vector(self, state: GlobalEosState) -> np.ndarray:
        return np.concatenate([
            self.rate(state.xbar_all), self.power(state.signal_all), self.power(state.interference_all)
        ])

    def con_vector(self, obs: ConObservation) -> np.ndarray:
        energy = np.zeros((obs.k_trunc, 3))
        for k, (j, e) in enumerate(obs.energies):
            energy[k] = (1.0, (j + 1) / obs.n_bs, self.power(e))
        eos = obs.eos
        return np.concatenate([
            self.eos_vector(eos.xbar_prev, eos.signal_prev, eos.interference_prev),
            energy.ravel(),
            [obs.counter / obs.n_bs],
        ])

    # Whole traces (training); decision slots 1..L-1, batch axis over traces

    def _stack(self, traces: Sequence[EpisodeTrace], fn) -> np.ndarray:
        return np.stack([fn(trace) for trace in traces], axis=1)

    def eos_inputs(self, traces: Sequence[EpisodeTrace], bs: int) -> np.ndarray:
        """(T, B, 3) local EOS inputs of one BS."""
        def one(trace: EpisodeTrace) -> np.ndarray:
            return np.stack([
                self.rate(trace.xbar_prev[1:, bs]),
                self.power(trace.signal_prev[1:, bs]),
                self.power(trace.interference_prev[1:, bs]),
            ], axis=-1)
        return self._stack(traces, one)

    def global_eos_inputs(self, traces: Sequence[EpisodeTrace]) -> np.ndarray:
        """(T, B, 3N) global EOS inputs."""
        def one(trace: EpisodeTrace) -> np.ndarray:
            return np.concatenate([
                self.rate(trace.xbar_prev[1:]),
                self.power(trace.signal_prev[1:]),
                self.power(trace.interference_prev[1:]),
            ], axis=-1)
        return self._stack(traces, one)

    def _energy_block(self, trace: EpisodeTrace, bs: int) -> np.ndarray:
        index = trace.energy_index[1:, bs]  # (T, k)
        present = index >= 0
        block = np.stack([
            present.astype(float),
            np.where(present, (index + 1) / trace.n_bs, 0.0),
            np.where(present, self.power(np.where(present, trace.energy_value[1:, bs], 1.0)), 0.0),
        ], axis=-1)  # (T, k, 3)
        return block.reshape(block.shape[0], -1)

    def con_inputs(self, traces: Sequence[EpisodeTrace], bs: int, centralized: bool = False) -> np.ndarray:
        """(T, B, d) CON inputs of one BS; centralized swaps in the global EOS part."""
        def one(trace: EpisodeTrace) -> np.ndarray:
            if centralized:
                eos = np.concatenate([
                    self.rate(trace.xbar_prev[1:]),
                    self.power(trace.signal_prev[1:]),
                    self.power(trace.interference_prev[1:]),
                ], axis=-1)
            else:
                eos = np.stack([
                    self.rate(trace.xbar_prev[1:, bs]),
                    self.power(trace.signal_prev[1:, bs]),
                    self.power(trace.interference_prev[1:, bs]),
                ], axis=-1)
            counter = (trace.counters[1:, bs] / trace.n_bs)[:, None]
            return np.concatenate([eos, self._energy_block(trace, bs), counter], axis=-1)
        return self._stack(traces, one)
