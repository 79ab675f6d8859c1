"""
Modulation alphabets - the seven schemes a BS can pick from
(QPSK, 8-PSK, 16/64/256 square QAM, 32/128 cross QAM).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from spectrum.exceptions import ConfigurationError
from spectrum.utils.serialization import CONSTELLATION_SCHEMA, CsvAppender

logger = logging.getLogger(__name__)


class ModulationFamily(str, Enum):
    """Constellation families."""
    PSK = "psk"
    SQUARE_QAM = "square_qam"
    CROSS_QAM = "cross_qam"


_FAMILY_BY_ORDER = {
    4: ModulationFamily.SQUARE_QAM,
    8: ModulationFamily.PSK,
    16: ModulationFamily.SQUARE_QAM,
    32: ModulationFamily.CROSS_QAM,
    64: ModulationFamily.SQUARE_QAM,
    128: ModulationFamily.CROSS_QAM,
    256: ModulationFamily.SQUARE_QAM,
}


@dataclass(frozen=True)
class ModScheme:
    """One modulation scheme of the BS alphabet."""
    order: int
    family: ModulationFamily

    def __post_init__(self):
        expected = _FAMILY_BY_ORDER.get(self.order)
        if expected is None:
            raise ConfigurationError(f"Unsupported modulation order: {self.order}")
        if expected != self.family:
            raise ConfigurationError(
                f"Order {self.order} belongs to family {expected.value}, not {self.family.value}"
            )

    @property
    def bits(self) -> int:
        return int(round(math.log2(self.order)))

    @property
    def name(self) -> str:
        if self.family == ModulationFamily.PSK:
            return f"{self.order}-PSK"
        return f"{self.order}-QAM"

    def __str__(self) -> str:
        return self.name


MOD_SCHEMES: Tuple[ModScheme, ...] = tuple(
    ModScheme(order, family) for order, family in sorted(_FAMILY_BY_ORDER.items())
)
MOD_ORDERS: Tuple[int, ...] = tuple(s.order for s in MOD_SCHEMES)


def scheme_for_order(order: int) -> ModScheme:
    """Look up the scheme of a modulation order (4..256)."""
    family = _FAMILY_BY_ORDER.get(int(order))
    if family is None:
        raise ConfigurationError(f"Unsupported modulation order: {order}")
    return ModScheme(int(order), family)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power symbol alphabet of a scheme."""
    scheme: ModScheme
    points: np.ndarray  # (M,) complex, read-only

    @property
    def order(self) -> int:
        return self.scheme.order

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def min_distance(self) -> float:
        diff = np.abs(self.points[:, None] - self.points[None, :])
        return float(np.min(diff[~np.eye(self.order, dtype=bool)]))


def _square_qam_points(order: int) -> np.ndarray:
    side = int(round(math.sqrt(order)))
    beta = np.arange(side)
    levels = math.sqrt(3.0 / (2.0 * (order - 1))) * (2 * beta + 1 - side)
    i_part, q_part = np.meshgrid(levels, levels, indexing="ij")
    return (i_part + 1j * q_part).ravel()


def _psk_points(order: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(order) / order)


def _cross_qam_points(order: int) -> np.ndarray:
    # Square array of 6x6 blocks (v x v points each) with the 4 corner blocks removed
    v = int(round(math.sqrt(order / 32)))
    side = 6 * v
    odd = np.arange(-(side - 1), side, 2, dtype=float)
    i_part, q_part = np.meshgrid(odd, odd, indexing="ij")
    corner = (np.abs(i_part) > 4 * v) & (np.abs(q_part) > 4 * v)
    points = (i_part + 1j * q_part)[~corner]
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


@lru_cache(maxsize=None)
def build_constellation(scheme: ModScheme) -> Constellation:
    """
    Build the constellation of a scheme.

    Square QAM uses levels sqrt(3/(2(M-1))) (2 beta + 1 - sqrt(M)) on both
    rails, PSK uses exp(2 pi j beta / M) and cross QAM uses an odd-integer
    lattice with corner blocks deleted, renormalized to unit power.

    Args:
        scheme: Modulation scheme

    Returns:
        Immutable Constellation (cached per scheme)

    Raises:
        ConfigurationError: unsupported order
    """
    if not isinstance(scheme, ModScheme):
        scheme = scheme_for_order(scheme)

    if scheme.family == ModulationFamily.SQUARE_QAM:
        points = _square_qam_points(scheme.order)
    elif scheme.family == ModulationFamily.PSK:
        points = _psk_points(scheme.order)
    else:
        points = _cross_qam_points(scheme.order)

    if points.size != scheme.order:
        raise ConfigurationError(f"{scheme}: built {points.size} points")
    points.setflags(write=False)
    return Constellation(scheme, points)


def write_constellation_csv(
    path: Path | str,
    constellation: Constellation,
    config_hash: Optional[str] = None,
) -> Path:
    """Dump constellation points as CSV rows (index, I, Q)."""
    writer = CsvAppender(path, ["index", "I", "Q"], CONSTELLATION_SCHEMA, config_hash)
    for index, point in enumerate(constellation.points):
        writer.append({"index": index, "I": float(point.real), "Q": float(point.imag)})
    logger.info(f"Constellation {constellation.scheme} written to {path}")
    return Path(path)
