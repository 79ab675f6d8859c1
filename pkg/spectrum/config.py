"""
Configuration module for Spectrum Sharing Lab.
Process settings come from the environment; experiment settings come from a
single JSON file so every unpublished radio constant can be changed without
touching code.
"""

import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from spectrum.exceptions import ConfigurationError


class Scenario(str, Enum):
    """Supported deployment scenarios."""
    INH_OFFICE = "inh_office"
    UMI_STREET_CANYON = "umi_street_canyon"


class Algorithm(str, Enum):
    """Multi-agent trainers."""
    DQN = "dqn"
    PPO = "ppo"


class DaccMode(str, Enum):
    """Critic input mode."""
    LOCAL = "local"  # every network sees local observations only
    CENTRALIZED = "centralized"  # critics see the global EOS state


class BaselineKind(str, Enum):
    """Non-learning benchmarks."""
    ED = "ed"
    ADAPTIVE_ED = "adaptive-ed"
    PF = "pf"


class LogFormat(str, Enum):
    TEXT = "text"
    JSON = "json"


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # Application
    APP_NAME: str = "Spectrum Sharing Lab"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: LogFormat = LogFormat.TEXT
    LOG_FILE: Optional[str] = None
    LOG_MAX_BYTES: int = 10485760  # 10MB
    LOG_BACKUP_COUNT: int = 5

    # Outputs
    OUTPUT_DIR: str = "./runs"
    DEFAULT_SEED: int = 0


# Default ED sweep: -22 dBm down to -92 dBm in 5 dB steps
DEFAULT_ED_SWEEP_DBM: Tuple[float, ...] = tuple(float(-22 - 5 * k) for k in range(15))

# Energy-vector truncation per scenario (12 BSs -> 3 entries, 19 BSs -> 5 entries)
DEFAULT_K_TRUNC = {
    Scenario.INH_OFFICE: 3,
    Scenario.UMI_STREET_CANYON: 5,
}


class ExperimentConfig(BaseModel):
    """All knobs of one experiment. Serialized as a single JSON file."""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    # Deployment
    scenario: Scenario = Scenario.INH_OFFICE
    inter_site_distance: float = 200.0  # UMi, meters
    office_length: float = 120.0  # InH, meters
    office_width: float = 50.0
    ue_height: float = 1.5
    bs_positions: Optional[List[Tuple[float, float]]] = None  # toy layouts (x, y)
    configuration_pool_size: int = 20000

    # Radio
    carrier_ghz: float = 6.0
    bandwidth_hz: float = 20e6
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    fading_alpha: float = 0.1
    tau: float = 50.0
    xbar_floor: float = 1e3  # bits/s
    k_trunc: Optional[int] = None

    # Training protocol
    algorithm: Algorithm = Algorithm.PPO
    dacc: bool = True
    n_batch: int = 8
    episode_length: int = 2000
    iterations: int = 100
    seed: int = 0
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 1e-3
    max_grad_norm: Optional[float] = 5.0
    bptt_window: int = 64
    hidden_dims: List[int] = Field(default_factory=lambda: [64, 64])
    recurrent_width: int = 32
    share_weights: bool = False

    # DQN exploration
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_iterations: int = 50

    # PPO loss
    ppo_clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    normalize_advantages: bool = True

    # Network input scaling
    feature_power_ref_dbm: float = -90.0
    feature_power_scale_db: float = 30.0
    feature_rate_ref_log10: float = 6.0
    feature_rate_scale_log10: float = 2.0

    # Validation protocol
    validation_every: int = 10
    validation_configurations: int = 10
    validation_realizations: int = 10

    # Baselines
    ed_threshold_dbm: float = -72.0
    adaptive_ed_thresholds_dbm: List[float] = Field(default_factory=lambda: list(DEFAULT_ED_SWEEP_DBM))
    pf_max_bs: int = 12

    @field_validator("n_batch", "episode_length", "bptt_window", "validation_configurations",
                     "validation_realizations", "configuration_pool_size", "validation_every")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("iterations")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be >= 0")
        return value

    @field_validator("hidden_dims")
    @classmethod
    def _dims(cls, value: List[int]) -> List[int]:
        if any(d < 1 for d in value):
            raise ValueError("hidden dims must be >= 1")
        return value

    @model_validator(mode="after")
    def _ranges(self) -> "ExperimentConfig":
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must be in [0, 1]")
        if not 0.0 <= self.fading_alpha <= 1.0:
            raise ValueError("fading_alpha must be in [0, 1]")
        if self.ppo_clip <= 0.0:
            raise ValueError("ppo_clip must be > 0")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon schedule must satisfy 0 <= end <= start <= 1")
        if self.xbar_floor <= 0.0:
            raise ValueError("xbar_floor must be > 0")
        if not self.adaptive_ed_thresholds_dbm:
            raise ValueError("adaptive_ed_thresholds_dbm must not be empty")
        if self.inter_site_distance <= 0.0:
            raise ValueError("inter_site_distance must be > 0")
        return self

    # Derived quantities

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def noise_power_w(self) -> float:
        noise_dbm = self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db
        return dbm_to_watts(noise_dbm)

    @property
    def samples_per_iteration(self) -> int:
        return self.n_batch * self.episode_length

    def resolve_k_trunc(self, n_bs: int) -> int:
        """Energy-vector length actually used for a layout with n_bs BSs."""
        if self.k_trunc is not None:
            return max(1, min(self.k_trunc, max(n_bs - 1, 1)))
        if self.bs_positions is None and self.scenario in DEFAULT_K_TRUNC:
            return DEFAULT_K_TRUNC[self.scenario]
        return max(n_bs - 1, 1)

    def epsilon_at(self, iteration: int) -> float:
        """Linear epsilon schedule; iteration counts from 0."""
        if self.epsilon_decay_iterations <= 0:
            return self.epsilon_end
        frac = min(max(iteration, 0) / self.epsilon_decay_iterations, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    # Serialization

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]

    def to_file(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True))

    @classmethod
    def from_file(cls, path: Path | str) -> "ExperimentConfig":
        """
        Load and validate an experiment config.

        Args:
            path: JSON file path

        Returns:
            Validated ExperimentConfig

        Raises:
            ConfigurationError: missing file, malformed JSON or invalid values
        """
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigurationError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file is not valid JSON: {path}: {e}") from e
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid experiment config: {e}") from e

    @classmethod
    def desk_profile(cls, **overrides) -> "ExperimentConfig":
        """Small profile used by tests and quick runs (L=100, N_batch=2)."""
        base = {"episode_length": 100, "n_batch": 2}
        base.update(overrides)
        return cls.from_dict(base)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


# Global settings instance
settings = Settings()
