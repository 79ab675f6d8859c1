"""
Experiment assembly - turns an ExperimentConfig into the layout, environment,
configuration pool and feature scaler every command works on.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from spectrum.channel.fading import FadingProcess
from spectrum.channel.layout import ConfigurationPool, Layout, custom_layout, generate_layout
from spectrum.config import ExperimentConfig
from spectrum.mac.env import SpectrumSharingEnv
from spectrum.mac.observations import RadioParams
from spectrum.rl.features import FeatureScaler

logger = logging.getLogger(__name__)


@dataclass
class Experiment:
    """Everything derived from one config."""
    config: ExperimentConfig
    layout: Layout
    env: SpectrumSharingEnv
    pool: ConfigurationPool
    scaler: FeatureScaler

    @property
    def n_bs(self) -> int:
        return self.layout.n_bs

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()


def build_layout(config: ExperimentConfig) -> Layout:
    if config.bs_positions is not None:
        return custom_layout(config.scenario, config.bs_positions)
    return generate_layout(
        config.scenario,
        inter_site_distance=config.inter_site_distance,
        office_length=config.office_length,
        office_width=config.office_width,
    )


def build_experiment(config: ExperimentConfig, layout: Optional[Layout] = None) -> Experiment:
    """
    Assemble an experiment.

    Args:
        config: Validated experiment config
        layout: Use this layout instead of the one the config describes

    Returns:
        Experiment
    """
    layout = layout or build_layout(config)
    radio = RadioParams.from_config(config, layout.n_bs)
    env = SpectrumSharingEnv(layout, radio, FadingProcess(config.fading_alpha))
    pool = ConfigurationPool(layout, config.seed, config.configuration_pool_size, config.ue_height)
    logger.info(f"Experiment initialized: config {config.config_hash()}, {layout.n_bs} BSs")
    return Experiment(config, layout, env, pool, FeatureScaler.from_config(config))
