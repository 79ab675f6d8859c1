"""
Spectrum Sharing Environment - contention mini-slots, inter-BS energy
sensing, SINR/throughput realization and the common PF reward.

Each slot runs in two phases. In the contention phase BSs act in increasing
order of their random counters; BS i senses the energy of every earlier BS
that committed to transmit. In the data phase the committed decisions are
realized: SINR, symbol error probability, throughput, smoothed rates and
the reward shared by all BSs.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from spectrum.baselines.genie import genie_orders
from spectrum.channel.fading import FadingProcess, evolve_channel, realize_channel
from spectrum.channel.layout import Layout, UeConfiguration
from spectrum.exceptions import ContractViolation
from spectrum.mac.observations import (
    ACTION_ORDERS,
    ConObservation,
    Decision,
    EnvState,
    Phase,
    RadioParams,
    action_for_order,
    check_action,
)
from spectrum.mac.reward import initial_reward, per_ue_reward, smooth_rate
from spectrum.mac.trace import EpisodeTrace
from spectrum.modem.ser import ser_for_orders
from spectrum.utils.rng import stream

logger = logging.getLogger(__name__)

WARMUP_ORDER = 4


class Policy:
    """
    Decision maker for all BSs of an environment.

    Decentralized policies implement `act` and only ever see a BS's own
    ConObservation. Setting `genie_modulation` makes `act` return a transmit
    decision in {0, 1}; the scheme is then chosen from the realized SINR once
    every BS has decided. Centralized policies set `centralized` and implement
    `select_transmitters`, which sees the full environment state.
    """

    genie_modulation: bool = False
    centralized: bool = False

    def reset(self, n_bs: int) -> None:
        """Called at the start of every episode."""

    def act(self, bs: int, observation: ConObservation) -> Decision:
        raise NotImplementedError

    def select_transmitters(self, env: "SpectrumSharingEnv", state: EnvState) -> np.ndarray:
        raise NotImplementedError


@dataclass
class SlotOutcome:
    """Result of one data phase."""
    rates: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    sinr: np.ndarray
    reward: float
    xbar: np.ndarray


class SpectrumSharingEnv:
    """
    One deployment (layout + radio constants). Episodes are independent and
    fully determined by (configuration, seed, episode index).
    """

    def __init__(self, layout: Layout, radio: RadioParams, fading: Optional[FadingProcess] = None):
        self.layout = layout
        self.radio = radio
        self.fading = fading or FadingProcess()
        self.n_bs = layout.n_bs

        logger.info(
            f"Spectrum sharing environment initialized: {self.n_bs} BSs, "
            f"k_trunc={radio.k_trunc}, alpha={self.fading.alpha}"
        )

    # Episode lifecycle

    def reset(self, configuration: UeConfiguration, seed: int, episode: int = 0) -> EnvState:
        """
        Start an episode.

        Realizes the channel, plays the warm-up slot 0 (every BS transmits
        4-QAM) and initializes X_j[0] = max(R_j[0], xbar_floor).

        Args:
            configuration: UE placement
            seed: Root seed
            episode: Episode index, selects independent streams

        Returns:
            EnvState after slot 0, positioned at the EOS phase of slot 1
        """
        cfg_index = -1 if configuration.index is None else configuration.index
        channel_rng = stream(seed, "channel", episode, cfg_index)
        contention_rng = stream(seed, "contention", episode, cfg_index)

        channel = realize_channel(self.layout, configuration, channel_rng, self.radio.carrier_ghz)
        warmup = np.full(self.n_bs, action_for_order(WARMUP_ORDER), dtype=int)
        rates, signal, interference, _ = self._realize(channel, warmup)
        xbar0 = np.maximum(rates, self.radio.xbar_floor)

        return EnvState(
            xbar=xbar0,
            counters=contention_rng.permutation(self.n_bs),
            slot=0,
            phase=Phase.EOS,
            channel=evolve_channel(channel, self.fading, channel_rng),
            signal=signal,
            interference=interference,
            rates=rates,
            initial_reward=initial_reward(xbar0),
            channel_rng=channel_rng,
            contention_rng=contention_rng,
        )

    def sense(self, state: EnvState, bs: int, decided: np.ndarray) -> ConObservation:
        """ConObservation of `bs` given the decisions of BSs with smaller counters."""
        earlier = np.flatnonzero((state.counters < state.counters[bs]) & (decided > 0))
        energies = self.radio.tx_power_w * state.channel.bs_gain[earlier, bs]
        order = np.argsort(-energies, kind="stable")
        sensed = tuple((int(earlier[k]), float(energies[k])) for k in order)
        return ConObservation(
            eos=state.eos_observation(bs),
            sensed=sensed,
            counter=int(state.counters[bs]),
            n_bs=self.n_bs,
            k_trunc=self.radio.k_trunc,
        )

    def run_contention_phase(self, state: EnvState, policy: Policy):
        """
        Query BSs in increasing counter order and commit their actions.

        Args:
            state: Current state (EOS phase)
            policy: Policy for all BSs

        Returns:
            (action codes (N,), behaviour probabilities (N,), observations per BS)

        Raises:
            ContractViolation: policy returned an out-of-range action
        """
        if state.phase != Phase.EOS:
            raise ContractViolation(f"Contention phase entered from {state.phase.value}")
        state.phase = Phase.CON
        n = self.n_bs
        codes = np.zeros(n, dtype=int)
        probs = np.ones(n, dtype=float)
        observations: List[Optional[ConObservation]] = [None] * n

        if policy.centralized:
            decided = np.asarray(policy.select_transmitters(self, state), dtype=int)
            if decided.shape != (n,):
                raise ContractViolation(f"Centralized decision must have shape ({n},)")
            for bs in np.argsort(state.counters):
                check_action(decided[bs], binary=True)
                observations[bs] = self.sense(state, bs, decided)
            codes = decided
        else:
            for bs in np.argsort(state.counters):
                bs = int(bs)
                observations[bs] = self.sense(state, bs, codes)
                decision = policy.act(bs, observations[bs])
                codes[bs] = check_action(decision.action, binary=policy.genie_modulation)
                probs[bs] = float(decision.probability)

        if policy.genie_modulation or policy.centralized:
            codes = self.apply_genie_modulation(state, codes)

        state.committed = codes
        return codes, probs, observations

    def apply_genie_modulation(self, state: EnvState, transmit: np.ndarray) -> np.ndarray:
        """Turn binary decisions into action codes using the realized SINR."""
        a = np.asarray(transmit, dtype=int)
        sinr = state.channel.sinr(a, self.radio.tx_power_w, self.radio.noise_power_w)
        orders = genie_orders(sinr)
        codes = np.array([action_for_order(o) for o in orders], dtype=int)
        return np.where(a > 0, codes, 0)

    def run_data_phase(self, state: EnvState, codes: Optional[np.ndarray] = None) -> SlotOutcome:
        """
        Realize the committed actions of the current slot.

        Updates X per exponential smoothing, computes the common reward,
        evolves the channel, redraws counters and returns to the EOS phase.
        """
        codes = state.committed if codes is None else np.asarray(codes, dtype=int)
        if codes is None:
            raise ContractViolation("Data phase needs committed actions")
        rates, signal, interference, sinr = self._realize(state.channel, codes)

        rewards = per_ue_reward(rates, state.xbar, self.radio.tau)
        xbar = smooth_rate(state.xbar, rates, self.radio.tau)

        state.xbar = xbar
        state.signal = signal
        state.interference = interference
        state.rates = rates
        state.slot += 1
        state.channel = evolve_channel(state.channel, self.fading, state.channel_rng)
        state.counters = state.contention_rng.permutation(self.n_bs)
        state.phase = Phase.EOS
        state.committed = None

        return SlotOutcome(rates, signal, interference, sinr, float(np.sum(rewards)), xbar)

    def _realize(self, channel, codes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        orders = ACTION_ORDERS[codes]
        active = (codes > 0).astype(float)
        signal, interference = channel.received_powers(active, self.radio.tx_power_w)
        direct = self.radio.tx_power_w * np.diag(channel.gain)
        sinr = direct / (interference + self.radio.noise_power_w)
        ser = ser_for_orders(orders, sinr)
        bits = np.where(orders > 0, np.log2(np.maximum(orders, 1)), 0.0)
        rates = self.radio.bandwidth_hz * (1.0 - ser) * bits * active
        return rates, signal, interference, sinr

    def generate_episode(self, state: EnvState, policy: Policy, length: int) -> EpisodeTrace:
        """
        Roll out an episode of `length` slots from a freshly reset state.

        Row 0 of the trace is the warm-up slot with reward sum_j log X_j[0];
        rows 1..length-1 hold the policy's decisions.
        """
        if length < 1:
            raise ContractViolation("Episode length must be >= 1")
        if state.slot != 0:
            raise ContractViolation("generate_episode expects a freshly reset state")

        trace = EpisodeTrace.allocate(length, self.n_bs, self.radio.k_trunc)
        trace.actions[0] = action_for_order(WARMUP_ORDER)
        trace.xbar[0] = state.xbar
        trace.rewards[0] = state.initial_reward
        trace.rates[0] = state.rates
        policy.reset(self.n_bs)

        for n in range(1, length):
            trace.xbar_prev[n] = state.xbar
            trace.signal_prev[n] = state.signal
            trace.interference_prev[n] = state.interference
            trace.counters[n] = state.counters

            codes, probs, observations = self.run_contention_phase(state, policy)
            for bs, obs in enumerate(observations):
                for k, (j, energy) in enumerate(obs.energies):
                    trace.energy_index[n, bs, k] = j
                    trace.energy_value[n, bs, k] = energy

            outcome = self.run_data_phase(state, codes)
            trace.actions[n] = codes
            trace.behavior_prob[n] = probs
            trace.rates[n] = outcome.rates
            trace.sinr[n] = outcome.sinr
            trace.xbar[n] = outcome.xbar
            trace.rewards[n] = outcome.reward

        return trace
