"""
Large-scale propagation for the two supported scenarios (3GPP TR 38.901,
InH-Office mixed and UMi-Street Canyon): LOS probability, LOS/NLOS pathloss
and lognormal shadowing spread. Constants are listed in docs/channel_model.md.

All functions accept numpy arrays and broadcast; scalar inputs give floats.
"""

import logging
from typing import Union

import numpy as np

from spectrum.config import Scenario
from spectrum.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SPEED_OF_LIGHT = 3.0e8

# Minimum distances of the model validity range (meters)
INH_MIN_D3D_M = 1.0
UMI_MIN_D2D_M = 10.0

# Shadow fading standard deviations (dB)
SHADOWING_STD_DB = {
    (Scenario.INH_OFFICE, True): 3.0,
    (Scenario.INH_OFFICE, False): 8.03,
    (Scenario.UMI_STREET_CANYON, True): 4.0,
    (Scenario.UMI_STREET_CANYON, False): 7.82,
}


def _as_scenario(scenario: Scenario) -> Scenario:
    try:
        return Scenario(scenario)
    except ValueError as e:
        raise ConfigurationError(f"Unsupported scenario: {scenario}") from e


def _maybe_scalar(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def los_probability(scenario: Scenario, distance_2d: ArrayLike) -> ArrayLike:
    """
    Probability that a link of the given 2D length is line-of-sight.

    InH-Office (mixed office):
        1                                   d <= 1.2
        exp(-(d - 1.2) / 4.7)               1.2 < d < 6.5
        0.32 * exp(-(d - 6.5) / 32.6)       d >= 6.5
    UMi-Street Canyon:
        1                                   d <= 18
        18/d + exp(-d/36) * (1 - 18/d)      d > 18

    Args:
        scenario: Deployment scenario
        distance_2d: Horizontal distance(s) in meters, >= 0

    Returns:
        Probability in [0, 1], non-increasing in distance
    """
    scenario = _as_scenario(scenario)
    d = np.asarray(distance_2d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance_2d must be non-negative")

    if scenario == Scenario.INH_OFFICE:
        p = np.where(
            d <= 1.2,
            1.0,
            np.where(d < 6.5, np.exp(-(d - 1.2) / 4.7), 0.32 * np.exp(-(d - 6.5) / 32.6)),
        )
    else:
        safe = np.maximum(d, 18.0)
        p = np.where(d <= 18.0, 1.0, 18.0 / safe + np.exp(-safe / 36.0) * (1.0 - 18.0 / safe))

    return _maybe_scalar(np.clip(p, 0.0, 1.0), distance_2d)


def shadowing_std_db(scenario: Scenario, los: ArrayLike) -> ArrayLike:
    """Shadow fading standard deviation (dB) for LOS/NLOS links."""
    scenario = _as_scenario(scenario)
    los_arr = np.asarray(los, dtype=bool)
    std = np.where(los_arr, SHADOWING_STD_DB[(scenario, True)], SHADOWING_STD_DB[(scenario, False)])
    return _maybe_scalar(std, los)


def pathloss_from_distances(
    scenario: Scenario,
    distance_2d: ArrayLike,
    distance_3d: ArrayLike,
    carrier_ghz: float,
    los: ArrayLike,
    h_tx: float,
    h_rx: float,
) -> np.ndarray:
    """
    Vectorized pathloss (dB) without shadowing.

    Distances below the validity range are clamped and a warning is logged
    with the number of affected links.

    Args:
        scenario: Deployment scenario
        distance_2d: Horizontal distances (m)
        distance_3d: Direct distances (m)
        carrier_ghz: Carrier frequency in GHz
        los: LOS flags, broadcastable against the distances
        h_tx: Transmitter height (m)
        h_rx: Receiver height (m); the lower endpoint for BS-to-BS links

    Returns:
        Pathloss array in dB
    """
    scenario = _as_scenario(scenario)
    if carrier_ghz <= 0:
        raise ConfigurationError("carrier_ghz must be positive")
    d2 = np.asarray(distance_2d, dtype=float)
    d3 = np.asarray(distance_3d, dtype=float)
    los_arr = np.asarray(los, dtype=bool)
    fc = float(carrier_ghz)

    if scenario == Scenario.INH_OFFICE:
        clamped = d3 < INH_MIN_D3D_M
        if np.any(clamped):
            logger.warning(f"InH pathloss: {int(np.sum(clamped))} link(s) below {INH_MIN_D3D_M} m clamped")
        d3 = np.maximum(d3, INH_MIN_D3D_M)
        pl_los = 32.4 + 17.3 * np.log10(d3) + 20.0 * np.log10(fc)
        pl_nlos = 38.3 * np.log10(d3) + 17.30 + 24.9 * np.log10(fc)
    else:
        clamped = d2 < UMI_MIN_D2D_M
        if np.any(clamped):
            logger.warning(f"UMi pathloss: {int(np.sum(clamped))} link(s) below {UMI_MIN_D2D_M} m clamped")
        d2 = np.maximum(d2, UMI_MIN_D2D_M)
        dh = h_tx - h_rx
        d3 = np.sqrt(d2 ** 2 + dh ** 2)
        # Breakpoint distance with effective environment height 1 m
        h_bs_eff = max(max(h_tx, h_rx) - 1.0, 1e-3)
        h_ut_eff = max(min(h_tx, h_rx) - 1.0, 1e-3)
        d_bp = 4.0 * h_bs_eff * h_ut_eff * fc * 1e9 / SPEED_OF_LIGHT
        pl1 = 32.4 + 21.0 * np.log10(d3) + 20.0 * np.log10(fc)
        pl2 = (
            32.4 + 40.0 * np.log10(d3) + 20.0 * np.log10(fc)
            - 9.5 * np.log10(d_bp ** 2 + dh ** 2)
        )
        pl_los = np.where(d2 <= d_bp, pl1, pl2)
        pl_nlos = 35.3 * np.log10(d3) + 22.4 + 21.3 * np.log10(fc) - 0.3 * (min(h_tx, h_rx) - 1.5)

    return np.where(los_arr, pl_los, np.maximum(pl_los, pl_nlos))


def pathloss_db(
    scenario: Scenario,
    tx_position: np.ndarray,
    rx_position: np.ndarray,
    carrier_ghz: float = 6.0,
    los: bool = True,
) -> float:
    """
    Pathloss of one link in dB (shadowing excluded).

    Args:
        scenario: Deployment scenario
        tx_position: Transmitter (x, y, z) in meters
        rx_position: Receiver (x, y, z) in meters
        carrier_ghz: Carrier frequency in GHz
        los: Line-of-sight flag

    Returns:
        Pathloss in dB; NLOS is never below LOS for the same link
    """
    tx = np.asarray(tx_position, dtype=float)
    rx = np.asarray(rx_position, dtype=float)
    d2 = float(np.linalg.norm(tx[:2] - rx[:2]))
    d3 = float(np.linalg.norm(tx - rx))
    value = pathloss_from_distances(scenario, d2, d3, carrier_ghz, los, float(tx[2]), float(rx[2]))
    return float(value)
