"""
Test Baselines - genie modulation, energy detection, adaptive ED and the
exhaustive centralized PF scheduler.
"""

import itertools
import math

import numpy as np
import pytest

from spectrum.baselines.energy_detection import EdPolicy, adaptive_ed, ed_decision, evaluate_policy
from spectrum.baselines.genie import genie_modulation, genie_orders
from spectrum.baselines.pf_scheduler import PfPolicy, centralized_pf, pf_metric
from spectrum.channel.fading import realize_channel
from spectrum.channel.layout import sample_configuration
from spectrum.config import dbm_to_watts
from spectrum.exceptions import CapabilityError, ConfigurationError
from spectrum.modem.constellation import MOD_SCHEMES
from spectrum.modem.ser import ser_analytic
from spectrum.utils.rng import stream


class TestGenie:
    def test_matches_explicit_argmax(self):
        grid = 10.0 ** (np.linspace(-10.0, 45.0, 10_000) / 10.0)
        vectorized = genie_orders(grid)
        for sinr, order in zip(grid[::50], vectorized[::50]):
            scores = [(1.0 - ser_analytic(s, float(sinr))) * math.log2(s.order) for s in MOD_SCHEMES]
            assert order == MOD_SCHEMES[int(np.argmax(scores))].order
            assert genie_modulation(float(sinr)).order == order

    def test_order_grows_with_sinr(self):
        orders = genie_orders(10.0 ** (np.linspace(-10.0, 45.0, 10_000) / 10.0))
        assert np.all(np.diff(orders) >= 0)
        assert orders[0] == 4
        assert orders[-1] == 256

    def test_negative_sinr(self):
        with pytest.raises(ValueError):
            genie_modulation(-1.0)


class TestEnergyDetection:
    def test_strict_threshold(self):
        assert ed_decision([0.5, 0.5], 1.0) == 0
        assert ed_decision([0.5, 0.4], 1.0) == 1
        assert ed_decision([], 1e-15) == 1

    def test_negative_energy(self):
        with pytest.raises(ValueError):
            ed_decision([-1.0], 1.0)

    def test_monotone_in_energies_and_threshold(self, rng):
        for _ in range(200):
            energies = list(rng.exponential(1e-9, size=rng.integers(0, 5)))
            threshold = float(rng.exponential(2e-9))
            extra = float(rng.exponential(1e-9))
            if ed_decision(energies, threshold) == 0:
                assert ed_decision(energies + [extra], threshold) == 0
            assert ed_decision(energies, threshold) <= ed_decision(energies, threshold * 1.5)

    def test_threshold_range(self):
        assert EdPolicy(-92.0).threshold_w == pytest.approx(dbm_to_watts(-92.0))
        with pytest.raises(ConfigurationError):
            EdPolicy(-10.0)
        with pytest.raises(ConfigurationError):
            EdPolicy(-100.0)

    def test_first_bs_always_transmits(self, toy_experiment):
        env = toy_experiment.env
        state = env.reset(toy_experiment.pool[0], seed=3)
        codes, _, _ = env.run_contention_phase(state, EdPolicy(-92.0))
        assert codes[int(np.argmin(state.counters))] > 0

    def test_adaptive_ed_picks_the_best(self, toy_experiment):
        env, configuration = toy_experiment.env, toy_experiment.pool[1]
        thresholds = [-52.0, -72.0, -92.0]
        result = adaptive_ed(env, configuration, thresholds, episodes_per_threshold=2, gamma=0.9, length=15, seed=4)
        assert result.best_threshold_dbm in thresholds
        assert result.best_reward == max(result.rewards.values())
        direct = evaluate_policy(env, configuration, EdPolicy(result.best_threshold_dbm), 15, 0.9, 4, episodes=2)
        assert direct == pytest.approx(result.best_reward)

    def test_adaptive_ed_needs_thresholds(self, toy_experiment):
        with pytest.raises(ConfigurationError):
            adaptive_ed(toy_experiment.env, toy_experiment.pool[0], [], length=5)


def _pf_oracle(xbar, gain, bandwidth, power, noise):
    n = len(xbar)
    best, best_key = None, None
    for vector in itertools.product((0, 1), repeat=n):
        total = 0.0
        for j in range(n):
            if not vector[j]:
                continue
            interference = sum(power * gain[i][j] for i in range(n) if i != j and vector[i])
            sinr = power * gain[j][j] / (interference + noise)
            total += bandwidth * math.log2(1.0 + sinr) / xbar[j]
        key = (-total, sum(vector))
        if best_key is None or key < best_key:
            best, best_key = vector, key
    return np.array(best), -best_key[0]


class TestCentralizedPf:
    @pytest.fixture
    def radio(self, toy_experiment):
        return toy_experiment.env.radio

    def test_matches_enumeration(self, toy_experiment, radio):
        layout = toy_experiment.layout
        for k in range(50):
            rng = stream(21, "pf-oracle", k)
            channel = realize_channel(layout, sample_configuration(layout, rng), rng)
            xbar = 10.0 ** rng.uniform(5.0, 8.0, size=layout.n_bs)
            chosen = centralized_pf(xbar, channel, radio.bandwidth_hz, radio.tx_power_w, radio.noise_power_w)
            expected, best = _pf_oracle(
                xbar, channel.gain.tolist(), radio.bandwidth_hz, radio.tx_power_w, radio.noise_power_w
            )
            assert np.array_equal(chosen, expected)
            metric = pf_metric(chosen, xbar, channel, radio.bandwidth_hz, radio.tx_power_w, radio.noise_power_w)
            assert metric == pytest.approx(best, rel=1e-12)

    def test_beats_threshold_decisions(self, toy_experiment, radio):
        env = toy_experiment.env
        for episode in range(10):
            state = env.reset(toy_experiment.pool[episode], seed=8, episode=episode)
            ed_codes, _, _ = env.run_contention_phase(state, EdPolicy(-72.0))
            args = (state.xbar, state.channel, radio.bandwidth_hz, radio.tx_power_w, radio.noise_power_w)
            pf = centralized_pf(*args)
            assert pf_metric(pf, *args) >= pf_metric((ed_codes > 0).astype(int), *args)

    def test_ties_prefer_silence(self, toy_experiment, radio):
        rng = stream(2, "pf-ties")
        layout = toy_experiment.layout
        channel = realize_channel(layout, sample_configuration(layout, rng), rng)
        # Zero power: every vector scores 0
        assert not centralized_pf(np.ones(4), channel, radio.bandwidth_hz, 0.0, radio.noise_power_w).any()

    def test_size_limits(self):
        with pytest.raises(CapabilityError):
            centralized_pf(np.ones(13), None, 1.0, 1.0, 1.0)
        with pytest.raises(CapabilityError):
            centralized_pf(np.ones(21), None, 1.0, 1.0, 1.0, force=True)
        with pytest.raises(CapabilityError):
            PfPolicy(max_bs=12).reset(19)
        with pytest.raises(CapabilityError):
            PfPolicy(max_bs=12, force=True).reset(21)
        PfPolicy(max_bs=12, force=True).reset(19)

    def test_episode_with_pf(self, toy_experiment):
        env = toy_experiment.env
        trace = env.generate_episode(env.reset(toy_experiment.pool[0], seed=5), PfPolicy(), 8)
        assert trace.length == 8
        assert np.all(trace.rates[trace.actions == 0] == 0.0)
        assert trace.actions[1:].max() > 0
