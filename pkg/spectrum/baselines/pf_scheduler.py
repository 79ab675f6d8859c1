"""
Centralized proportional-fair scheduler: exhaustive search over the 2^N
on/off vectors for the one maximizing sum_j R_j / X_j with Shannon rates.
"""

import logging

import numpy as np

from spectrum.channel.fading import ChannelRealization
from spectrum.exceptions import CapabilityError
from spectrum.mac.env import Policy, SpectrumSharingEnv
from spectrum.mac.observations import EnvState

logger = logging.getLogger(__name__)

PF_HARD_LIMIT = 20
_CHUNK_BITS = 14


def pf_metric(
    active: np.ndarray,
    xbar: np.ndarray,
    channel: ChannelRealization,
    bandwidth_hz: float,
    tx_power_w: float,
    noise_power_w: float,
) -> np.ndarray:
    """
    PF metric sum_j W log2(1 + SINR_j) a_j / X_j.

    `active` may be one vector (N,) or a stack of vectors (B, N).
    """
    a = np.atleast_2d(np.asarray(active, dtype=float))
    direct = tx_power_w * np.diag(channel.gain)
    interference = tx_power_w * (a @ channel.gain) - a * direct
    sinr = direct / (np.maximum(interference, 0.0) + noise_power_w)
    rates = bandwidth_hz * np.log2(1.0 + sinr) * a
    metric = np.sum(rates / xbar, axis=1)
    return metric if np.ndim(active) == 2 else metric[0]


def _candidates(n_bs: int, start: int, stop: int) -> np.ndarray:
    # Bit for BS 0 is the most significant so integer order is lexicographic order
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n_bs - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def centralized_pf(
    xbar: np.ndarray,
    channel: ChannelRealization,
    bandwidth_hz: float,
    tx_power_w: float,
    noise_power_w: float,
    max_bs: int = 12,
    force: bool = False,
) -> np.ndarray:
    """
    Exhaustive PF transmit scheduling for one slot.

    Ties go to fewer transmitters, then to the lexicographically smallest vector.

    Args:
        xbar: Smoothed rates X_j (bits/s)
        channel: Channel of the slot
        bandwidth_hz: W
        tx_power_w: Transmit power (watts)
        noise_power_w: Noise power (watts)
        max_bs: Enumeration limit enforced unless `force`
        force: Allow N above `max_bs` (never above 20)

    Returns:
        Binary transmit vector (N,)

    Raises:
        CapabilityError: N too large for exhaustive search
    """
    n = int(np.asarray(xbar).shape[0])
    if n > PF_HARD_LIMIT or (n > max_bs and not force):
        raise CapabilityError(
            f"Centralized PF enumerates 2^{n} vectors; limit is {max_bs} "
            f"(hard limit {PF_HARD_LIMIT}, use --force to raise the soft limit)"
        )

    total = 1 << n
    chunk = 1 << _CHUNK_BITS
    best_key = None
    best_vector = None
    for start in range(0, total, chunk):
        candidates = _candidates(n, start, min(start + chunk, total))
        metric = pf_metric(candidates, xbar, channel, bandwidth_hz, tx_power_w, noise_power_w)
        top = metric.max()
        ties = np.flatnonzero(metric == top)
        counts = candidates[ties].sum(axis=1)
        pick = ties[np.argmin(counts)]  # first minimum is the lexicographically smallest
        key = (-float(top), int(candidates[pick].sum()), start + int(pick))
        if best_key is None or key < best_key:
            best_key, best_vector = key, candidates[pick].astype(int)

    return best_vector


class PfPolicy(Policy):
    """Centralized PF transmit decisions with genie modulation."""

    centralized = True

    def __init__(self, max_bs: int = 12, force: bool = False):
        self.max_bs = max_bs
        self.force = force

    def reset(self, n_bs: int) -> None:
        if n_bs > PF_HARD_LIMIT or (n_bs > self.max_bs and not self.force):
            raise CapabilityError(f"Centralized PF refused for N={n_bs} (limit {self.max_bs})")

    def select_transmitters(self, env: SpectrumSharingEnv, state: EnvState) -> np.ndarray:
        radio = env.radio
        return centralized_pf(
            state.xbar, state.channel, radio.bandwidth_hz, radio.tx_power_w, radio.noise_power_w,
            max_bs=self.max_bs, force=self.force,
        )
