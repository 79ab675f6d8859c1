"""
Deployment geometry - BS layouts for the indoor office and urban micro
scenarios, and per-configuration UE placement.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from spectrum.config import Scenario
from spectrum.exceptions import ConfigurationError
from spectrum.utils.rng import stream
from spectrum.utils.serialization import LAYOUT_SCHEMA, to_jsonable

logger = logging.getLogger(__name__)

BS_HEIGHT_M = {
    Scenario.INH_OFFICE: 3.0,
    Scenario.UMI_STREET_CANYON: 10.0,
}

N_BS = {
    Scenario.INH_OFFICE: 12,
    Scenario.UMI_STREET_CANYON: 19,
}

DEFAULT_UE_HEIGHT_M = 1.5
MIN_UE_BS_DISTANCE_M = 1.0
_MAX_PLACEMENT_ROUNDS = 10000


@dataclass(frozen=True)
class Layout:
    """BS placement for one scenario."""
    scenario: Scenario
    bs_positions: np.ndarray  # (N, 3) meters
    bs_height: float
    bounds: Tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    inter_site_distance: Optional[float] = None

    @property
    def n_bs(self) -> int:
        return int(self.bs_positions.shape[0])

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Boolean mask of 2D points lying inside the bounding region."""
        xy = np.atleast_2d(xy)
        x_min, x_max, y_min, y_max = self.bounds
        return (
            (xy[:, 0] >= x_min) & (xy[:, 0] <= x_max)
            & (xy[:, 1] >= y_min) & (xy[:, 1] <= y_max)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "bs_positions": to_jsonable(self.bs_positions),
            "bs_height": self.bs_height,
            "bounds": list(self.bounds),
            "inter_site_distance": self.inter_site_distance,
        }


@dataclass(frozen=True)
class UeConfiguration:
    """One UE per BS; UE j is served by BS j."""
    ue_positions: np.ndarray  # (N, 3) meters
    ue_height: float = DEFAULT_UE_HEIGHT_M
    seed: Optional[int] = None
    index: Optional[int] = None  # position in a configuration pool

    @property
    def n_ue(self) -> int:
        return int(self.ue_positions.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ue_positions": to_jsonable(self.ue_positions),
            "ue_height": self.ue_height,
            "seed": self.seed,
            "index": self.index,
        }


def generate_layout(
    scenario: Scenario,
    inter_site_distance: Optional[float] = None,
    office_length: float = 120.0,
    office_width: float = 50.0,
) -> Layout:
    """
    Build the deterministic BS layout of a scenario.

    InH-Office: 12 ceiling BSs at 3 m in two rows of six across the office.
    UMi-Street Canyon: 19 BSs at 10 m on a two-ring hexagonal grid.

    Args:
        scenario: Deployment scenario
        inter_site_distance: UMi inter-site distance in meters (default 200)
        office_length: InH office length in meters
        office_width: InH office width in meters

    Returns:
        Layout

    Raises:
        ConfigurationError: unsupported scenario or non-positive dimensions
    """
    try:
        scenario = Scenario(scenario)
    except ValueError as e:
        raise ConfigurationError(f"Unsupported scenario: {scenario}") from e

    if scenario == Scenario.INH_OFFICE:
        if office_length <= 0 or office_width <= 0:
            raise ConfigurationError("Office dimensions must be positive")
        height = BS_HEIGHT_M[scenario]
        x_step = office_length / 6.0
        y_offset = min(10.0, office_width / 4.0)
        xs = x_step * (np.arange(6) + 0.5)
        ys = np.array([office_width / 2.0 - y_offset, office_width / 2.0 + y_offset])
        positions = np.array([[x, y, height] for y in ys for x in xs], dtype=float)
        bounds = (0.0, float(office_length), 0.0, float(office_width))
        layout = Layout(scenario, positions, height, bounds)
    else:
        isd = 200.0 if inter_site_distance is None else float(inter_site_distance)
        if isd <= 0:
            raise ConfigurationError("inter_site_distance must be positive")
        height = BS_HEIGHT_M[scenario]
        positions = np.column_stack([_hex_sites(isd), np.full(19, height)])
        half_x = 2.5 * isd
        half_y = (math.sqrt(3.0) + 0.5) * isd
        layout = Layout(scenario, positions, height, (-half_x, half_x, -half_y, half_y), isd)

    positions.setflags(write=False)
    logger.info(f"Layout generated: {scenario.value} with {layout.n_bs} BSs")
    return layout


def custom_layout(
    scenario: Scenario,
    xy_positions: Sequence[Sequence[float]],
    margin: float = 10.0,
) -> Layout:
    """
    Layout with explicit BS positions and the channel family of a scenario.
    Used for small toy networks; the bounding region is the BS bounding box
    grown by `margin` meters.
    """
    scenario = Scenario(scenario)
    xy = np.asarray(xy_positions, dtype=float).reshape(-1, 2)
    if xy.shape[0] < 1:
        raise ConfigurationError("A layout needs at least one BS")
    height = BS_HEIGHT_M[scenario]
    positions = np.column_stack([xy, np.full(xy.shape[0], height)])
    positions.setflags(write=False)
    bounds = (
        float(xy[:, 0].min() - margin), float(xy[:, 0].max() + margin),
        float(xy[:, 1].min() - margin), float(xy[:, 1].max() + margin),
    )
    return Layout(scenario, positions, height, bounds)


def _hex_sites(isd: float) -> np.ndarray:
    """Center, first ring (6 at isd) and second ring (12) of a hexagonal grid."""
    sites = [(0.0, 0.0)]
    for k in range(6):
        angle = math.pi / 3.0 * k
        sites.append((isd * math.cos(angle), isd * math.sin(angle)))
    for k in range(6):
        angle = math.pi / 3.0 * k
        sites.append((2.0 * isd * math.cos(angle), 2.0 * isd * math.sin(angle)))
        mid = angle + math.pi / 6.0
        sites.append((math.sqrt(3.0) * isd * math.cos(mid), math.sqrt(3.0) * isd * math.sin(mid)))
    return np.array(sites, dtype=float)


def sample_configuration(
    layout: Layout,
    rng: np.random.Generator,
    ue_height: float = DEFAULT_UE_HEIGHT_M,
    seed: Optional[int] = None,
    index: Optional[int] = None,
) -> UeConfiguration:
    """
    Place one UE per BS.

    UE j is drawn uniformly over the bounding region, conditioned on BS j being
    its nearest BS (2D) and on being at least 1 m away from every BS.

    Args:
        layout: BS layout
        rng: Seeded generator
        ue_height: UE height in meters
        seed: Seed recorded with the configuration (informational)
        index: Pool index recorded with the configuration

    Returns:
        UeConfiguration
    """
    x_min, x_max, y_min, y_max = layout.bounds
    bs_xy = layout.bs_positions[:, :2]
    ue_xy = np.empty((layout.n_bs, 2))

    for j in range(layout.n_bs):
        for _ in range(_MAX_PLACEMENT_ROUNDS):
            candidates = np.column_stack([
                rng.uniform(x_min, x_max, size=64),
                rng.uniform(y_min, y_max, size=64),
            ])
            dist = np.linalg.norm(candidates[:, None, :] - bs_xy[None, :, :], axis=-1)
            ok = (np.argmin(dist, axis=1) == j) & (dist.min(axis=1) >= MIN_UE_BS_DISTANCE_M)
            if ok.any():
                ue_xy[j] = candidates[np.flatnonzero(ok)[0]]
                break
        else:
            raise ConfigurationError(f"Could not place a UE in the coverage region of BS {j}")

    positions = np.column_stack([ue_xy, np.full(layout.n_bs, ue_height)])
    positions.setflags(write=False)
    return UeConfiguration(positions, ue_height, seed, index)


class ConfigurationPool:
    """
    Reproducible pool of UE configurations.

    Entry k only depends on (seed, k), so entries are sampled lazily and the
    pool never has to be materialized in full. Validation draws from the tail
    of the pool, training from the head, keeping the two disjoint. Only the
    validation entries are kept in memory; training entries are resampled on
    every access.
    """

    def __init__(self, layout: Layout, seed: int, size: int, ue_height: float = DEFAULT_UE_HEIGHT_M):
        if size < 1:
            raise ConfigurationError("Configuration pool size must be >= 1")
        self.layout = layout
        self.seed = int(seed)
        self.size = int(size)
        self.ue_height = ue_height
        self._reserved: Set[int] = set()
        self._cache: Dict[int, UeConfiguration] = {}

        logger.info(f"Configuration pool initialized: {self.size} entries, seed {self.seed}")

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, index: int) -> UeConfiguration:
        if not 0 <= index < self.size:
            raise IndexError(f"Configuration index {index} out of range [0, {self.size})")
        if index in self._cache:
            return self._cache[index]
        configuration = sample_configuration(
            self.layout,
            stream(self.seed, "configuration", index),
            self.ue_height,
            seed=self.seed,
            index=index,
        )
        if index in self._reserved:
            self._cache[index] = configuration
        return configuration

    @property
    def cached(self) -> int:
        """Number of configurations held in memory."""
        return len(self._cache)

    def validation_indices(self, count: int) -> List[int]:
        """Fixed indices reserved for validation (the last `count` entries)."""
        count = min(count, self.size)
        indices = list(range(self.size - count, self.size))
        self._reserved.update(indices)
        return indices

    def training_indices(self, rng: np.random.Generator, count: int, reserved: int = 0) -> List[int]:
        """Draw `count` training indices uniformly from the non-reserved head of the pool."""
        upper = max(self.size - reserved, 1)
        return [int(k) for k in rng.integers(0, upper, size=count)]


def save_layout(
    path: Path | str,
    layout: Layout,
    configuration: Optional[UeConfiguration] = None,
    seed: Optional[int] = None,
) -> Path:
    """Write a layout (and optionally a configuration) as layout-v1 JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": LAYOUT_SCHEMA,
        "scenario": layout.scenario.value,
        "bs_positions": to_jsonable(layout.bs_positions),
        "ue_positions": to_jsonable(configuration.ue_positions) if configuration else None,
        "heights": {
            "bs": layout.bs_height,
            "ue": configuration.ue_height if configuration else None,
        },
        "bounds": list(layout.bounds),
        "inter_site_distance": layout.inter_site_distance,
        "seed": seed,
    }
    path.write_text(json.dumps(payload, indent=2))
    logger.info(f"Layout saved: {path}")
    return path


def load_layout(path: Path | str) -> Tuple[Layout, Optional[UeConfiguration]]:
    """Read a layout-v1 JSON file."""
    data = json.loads(Path(path).read_text())
    if data.get("schema") != LAYOUT_SCHEMA:
        raise ConfigurationError(f"{path}: not a {LAYOUT_SCHEMA} file")
    bs = np.asarray(data["bs_positions"], dtype=float)
    layout = Layout(
        scenario=Scenario(data["scenario"]),
        bs_positions=bs,
        bs_height=float(data["heights"]["bs"]),
        bounds=tuple(data["bounds"]),
        inter_site_distance=data.get("inter_site_distance"),
    )
    configuration = None
    if data.get("ue_positions") is not None:
        configuration = UeConfiguration(
            np.asarray(data["ue_positions"], dtype=float),
            float(data["heights"]["ue"]),
            data.get("seed"),
        )
    return layout, configuration
