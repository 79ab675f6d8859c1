"""
Symbol error probability and throughput.

ser_analytic is the closed-form approximation used by the simulator;
ser_monte_carlo is the symbol-level oracle (LS equalization followed by
nearest-point ML detection) used to check it.
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import erfc

from spectrum.exceptions import ContractViolation
from spectrum.modem.constellation import (
    ModScheme,
    ModulationFamily,
    build_constellation,
    scheme_for_order,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_MC_CHUNK = 1 << 16


def q_function(x: ArrayLike) -> ArrayLike:
    """Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt(2))."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def ser_analytic(scheme: ModScheme, sinr: ArrayLike) -> ArrayLike:
    """
    Approximate symbol error probability at a given SINR.

    Square QAM:  1 - (1 - 2(sqrt(M)-1)/sqrt(M) Q(sqrt(3 s/(M-1))))^2
    PSK:         2 Q(sqrt(2 s) sin(pi/M))
    Cross QAM:   4 Q(sqrt(3 s/(M-1)))

    Args:
        scheme: Modulation scheme (or its order)
        sinr: Linear SINR, scalar or array, >= 0

    Returns:
        Probability clipped to [0, 1]; float for scalar input
    """
    if not isinstance(scheme, ModScheme):
        scheme = scheme_for_order(scheme)
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be non-negative")

    m = float(scheme.order)
    if scheme.family == ModulationFamily.SQUARE_QAM:
        root = math.sqrt(m)
        rail = 2.0 * (root - 1.0) / root * q_function(np.sqrt(3.0 * s / (m - 1.0)))
        p = 1.0 - (1.0 - rail) ** 2
    elif scheme.family == ModulationFamily.PSK:
        p = 2.0 * q_function(np.sqrt(2.0 * s) * math.sin(math.pi / m))
    else:
        p = 4.0 * q_function(np.sqrt(3.0 * s / (m - 1.0)))

    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.ndim(sinr) == 0 else p


def ser_for_orders(orders: np.ndarray, sinr: np.ndarray) -> np.ndarray:
    """Element-wise SER for per-UE modulation orders (0 entries give SER 1)."""
    orders = np.asarray(orders, dtype=int)
    sinr = np.asarray(sinr, dtype=float)
    ser = np.ones(orders.shape, dtype=float)
    for order in np.unique(orders[orders > 0]):
        mask = orders == order
        ser[mask] = ser_analytic(scheme_for_order(int(order)), sinr[mask])
    return ser


def ser_monte_carlo(
    scheme: ModScheme,
    sinr: float,
    n_symbols: int,
    rng: np.random.Generator,
) -> float:
    """
    Empirical symbol error rate of LS equalization + ML detection.

    Each symbol sees y = h s + z with h ~ CN(0, 1) known at the receiver and
    z ~ CN(0, |h|^2 / sinr) standing in for interference plus noise. The
    receiver divides out h and picks the nearest constellation point.

    Args:
        scheme: Modulation scheme
        sinr: Linear SINR (np.inf for a noiseless link)
        n_symbols: Number of simulated symbols, >= 1
        rng: Seeded generator

    Returns:
        Fraction of wrongly detected symbols
    """
    if n_symbols < 1:
        raise ContractViolation("n_symbols must be >= 1")
    if not isinstance(scheme, ModScheme):
        scheme = scheme_for_order(scheme)
    constellation = build_constellation(scheme)
    if sinr <= 0:
        return 1.0 - 1.0 / scheme.order

    tree = cKDTree(np.column_stack([constellation.points.real, constellation.points.imag]))
    noise_std = 0.0 if np.isinf(sinr) else math.sqrt(1.0 / sinr)
    errors = 0
    remaining = n_symbols

    while remaining > 0:
        size = min(remaining, _MC_CHUNK)
        sent = rng.integers(0, scheme.order, size=size)
        h = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
        z = noise_std * np.abs(h) * (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
        y = h * constellation.points[sent] + z
        equalized = y / h
        _, detected = tree.query(np.column_stack([equalized.real, equalized.imag]))
        errors += int(np.count_nonzero(detected != sent))
        remaining -= size

    return errors / n_symbols


def throughput(
    a: int,
    scheme: Optional[ModScheme],
    ser: float,
    bandwidth_hz: float,
) -> float:
    """
    Rate of one link in bits/s: W (1 - ser) log2(M) when transmitting, else 0.

    Raises:
        ContractViolation: a is not 0/1, or a=1 without a scheme
    """
    if a not in (0, 1):
        raise ContractViolation(f"Transmit decision must be 0 or 1, got {a}")
    if a == 0:
        return 0.0
    if scheme is None:
        raise ContractViolation("A transmitting BS needs a modulation scheme")
    if not 0.0 <= ser <= 1.0:
        raise ContractViolation(f"ser must be a probability, got {ser}")
    return bandwidth_hz * (1.0 - ser) * scheme.bits


def ser_curve(scheme: ModScheme, sinr_db: np.ndarray, n_symbols: int, rng: np.random.Generator):
    """Rows (sinr_db, ser_analytic, ser_mc) over a dB grid."""
    rows = []
    for value_db in np.asarray(sinr_db, dtype=float):
        sinr = 10.0 ** (value_db / 10.0)
        rows.append({
            "sinr_db": float(value_db),
            "ser_analytic": ser_analytic(scheme, sinr),
            "ser_mc": ser_monte_carlo(scheme, sinr, n_symbols, rng) if n_symbols > 0 else float("nan"),
        })
    logger.info(f"SER curve computed for {scheme} over {len(rows)} points")
    return rows
