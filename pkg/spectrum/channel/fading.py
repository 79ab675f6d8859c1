"""
Channel realization and its slot-to-slot evolution.

gain[i, j] is the linear power gain from BS i's transmission to UE j:
    gain = 10^(-(PL + SF) / 10) * |h|^2
Large-scale terms (pathloss, shadowing, LOS flags) are drawn once per episode;
the complex small-scale coefficient h follows a unit-power first-order IIR
process h[n] = sqrt(1 - alpha^2) h[n-1] + alpha w[n], w ~ CN(0, 1).
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from spectrum.channel.layout import Layout, UeConfiguration
from spectrum.channel.pathloss import los_probability, pathloss_from_distances, shadowing_std_db
from spectrum.exceptions import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class FadingProcess:
    """First-order IIR small-scale fading with unit stationary power."""
    alpha: float = 0.1
    stream_name: str = "fading"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"Fading coefficient must lie in [0, 1], got {self.alpha}")

    @property
    def memory(self) -> float:
        return float(np.sqrt(1.0 - self.alpha ** 2))

    def step(self, h: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Advance coefficients by one slot."""
        innovation = complex_normal(rng, h.shape)
        return self.memory * h + self.alpha * innovation


@dataclass(frozen=True)
class ChannelRealization:
    """Downlink channel of one slot plus the static BS-to-BS sensing channel."""
    gain: np.ndarray  # (N, N) BS i -> UE j
    los_flags: np.ndarray  # (N, N) bool
    shadowing_db: np.ndarray  # (N, N)
    slot_index: int
    large_scale: np.ndarray  # (N, N) linear 10^(-(PL+SF)/10)
    small_scale: np.ndarray  # (N, N) complex h
    bs_gain: np.ndarray  # (N, N) BS j -> BS i large-scale gain, symmetric, zero diagonal

    @property
    def n_bs(self) -> int:
        return int(self.gain.shape[0])

    def received_powers(self, active: np.ndarray, tx_power_w: float):
        """
        Per-UE serving signal and interference (watts) for a transmit vector.

        S_j is zero when BS j is silent; I_j excludes noise.
        """
        a = np.asarray(active, dtype=float)
        if a.shape != (self.n_bs,):
            raise ContractViolation(f"Transmit vector must have shape ({self.n_bs},), got {a.shape}")
        direct = np.diag(self.gain)
        signal = tx_power_w * a * direct
        total = tx_power_w * (a @ self.gain)
        interference = np.maximum(total - tx_power_w * a * direct, 0.0)
        return signal, interference

    def sinr(self, active: np.ndarray, tx_power_w: float, noise_power_w: float) -> np.ndarray:
        """SINR of every UE as if its BS transmitted, given the other BSs' decisions."""
        a = np.asarray(active, dtype=float)
        direct = tx_power_w * np.diag(self.gain)
        _, interference = self.received_powers(a, tx_power_w)
        return direct / (interference + noise_power_w)


def _link_geometry(tx: np.ndarray, rx: np.ndarray):
    delta = tx[:, None, :] - rx[None, :, :]
    d2 = np.linalg.norm(delta[..., :2], axis=-1)
    d3 = np.linalg.norm(delta, axis=-1)
    return d2, d3


def realize_channel(
    layout: Layout,
    configuration: UeConfiguration,
    rng: np.random.Generator,
    carrier_ghz: float = 6.0,
) -> ChannelRealization:
    """
    Draw the large-scale channel of an episode and the initial fading state.

    Args:
        layout: BS layout
        configuration: UE positions (UE j served by BS j)
        rng: Channel stream of the episode
        carrier_ghz: Carrier frequency in GHz

    Returns:
        ChannelRealization at slot 0
    """
    if configuration.n_ue != layout.n_bs:
        raise ContractViolation(
            f"Configuration has {configuration.n_ue} UEs for {layout.n_bs} BSs"
        )
    scenario = layout.scenario
    n = layout.n_bs

    # BS -> UE links
    d2, d3 = _link_geometry(layout.bs_positions, configuration.ue_positions)
    los = rng.random((n, n)) < los_probability(scenario, d2)
    pl = pathloss_from_distances(
        scenario, d2, d3, carrier_ghz, los, layout.bs_height, configuration.ue_height
    )
    shadowing = rng.standard_normal((n, n)) * shadowing_std_db(scenario, los)
    large_scale = 10.0 ** (-(pl + shadowing) / 10.0)
    h = complex_normal(rng, (n, n))

    # BS -> BS sensing links: one draw per unordered pair
    b2, b3 = _link_geometry(layout.bs_positions, layout.bs_positions)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    bs_los = rng.random((n, n)) < los_probability(scenario, b2)
    bs_los = np.where(upper, bs_los, bs_los.T)
    bs_pl = pathloss_from_distances(
        scenario, b2, b3, carrier_ghz, bs_los, layout.bs_height, layout.bs_height
    )
    bs_shadow = rng.standard_normal((n, n)) * shadowing_std_db(scenario, bs_los)
    bs_shadow = np.where(upper, bs_shadow, bs_shadow.T)
    bs_gain = 10.0 ** (-(bs_pl + bs_shadow) / 10.0)
    np.fill_diagonal(bs_gain, 0.0)

    return ChannelRealization(
        gain=large_scale * np.abs(h) ** 2,
        los_flags=los,
        shadowing_db=shadowing,
        slot_index=0,
        large_scale=large_scale,
        small_scale=h,
        bs_gain=bs_gain,
    )


def evolve_channel(
    prev: ChannelRealization,
    fading: FadingProcess,
    rng: np.random.Generator,
) -> ChannelRealization:
    """
    Advance the channel by one slot.

    Only the small-scale coefficients change; pathloss, shadowing, LOS flags
    and the sensing channel are held for the whole episode.
    """
    h = fading.step(prev.small_scale, rng)
    return replace(
        prev,
        gain=prev.large_scale * np.abs(h) ** 2,
        small_scale=h,
        slot_index=prev.slot_index + 1,
    )
