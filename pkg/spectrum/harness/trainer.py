"""
Training orchestration - the outer iteration loop of both trainers with the
metrics stream, periodic checkpoints and validation reports.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from spectrum.config import Algorithm, ExperimentConfig
from spectrum.exceptions import NonFiniteLossError
from spectrum.harness.experiment import Experiment
from spectrum.harness.validation import ValidationReport, Validator
from spectrum.neural.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from spectrum.rl.agents import AgentSet, build_agents
from spectrum.rl.dqn import dqn_train_iteration
from spectrum.rl.ppo import ppo_train_iteration
from spectrum.rl.rollout import METRIC_FIELDS, IterationMetrics
from spectrum.utils.serialization import METRICS_SCHEMA, CsvAppender

logger = logging.getLogger(__name__)


@dataclass
class TrainingResult:
    """What a training run produced."""
    metrics: List[IterationMetrics] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)
    reports: List[Path] = field(default_factory=list)
    metrics_path: Optional[Path] = None


def checkpoint_path(out_dir: Path, iteration: int) -> Path:
    return out_dir / "checkpoints" / f"ckpt_{iteration:04d}.json"


def report_path(out_dir: Path, iteration: int) -> Path:
    return out_dir / "reports" / f"report_{iteration:04d}.json"


def load_agents(path: Path | str, experiment: Experiment) -> AgentSet:
    """
    Rebuild agents from a checkpoint produced under the same config.

    Raises:
        CheckpointError: unreadable checkpoint or config hash mismatch
        ConfigurationError: networks do not match the config's shapes
    """
    checkpoint = load_checkpoint(path, expected_hash=experiment.config_hash)
    agents = build_agents(experiment.config, experiment.n_bs)
    agents.load_states(checkpoint.networks)
    logger.info(f"Agents restored from {path} (iteration {checkpoint.iteration})")
    return agents


class Trainer:
    """Runs the configured trainer for config.iterations iterations."""

    def __init__(self, experiment: Experiment, out_dir: Path | str, agents: Optional[AgentSet] = None):
        self.experiment = experiment
        self.config: ExperimentConfig = experiment.config
        self.out_dir = Path(out_dir)
        self.agents = agents or build_agents(self.config, experiment.n_bs)
        self._validator: Optional[Validator] = None
        self._train_iteration = (
            ppo_train_iteration if self.config.algorithm == Algorithm.PPO else dqn_train_iteration
        )

        logger.info(
            f"Trainer initialized: {self.config.algorithm.value.upper()}, "
            f"{self.config.iterations} iterations, {self.config.samples_per_iteration} samples per iteration"
        )

    @property
    def validator(self) -> Validator:
        if self._validator is None:
            self._validator = Validator(self.experiment)
        return self._validator

    def save(self, iteration: int, path: Optional[Path] = None, **metadata) -> Path:
        checkpoint = Checkpoint(
            networks=self.agents.states(),
            config_hash=self.experiment.config_hash,
            iteration=iteration,
            rng_states={"seed": self.config.seed, "next_iteration": iteration},
            metadata={
                "algorithm": self.config.algorithm.value,
                "dacc_mode": self.agents.dacc_mode.value,
                "n_bs": self.experiment.n_bs,
                "k_trunc": self.agents.k_trunc,
                "share_weights": self.config.share_weights,
                **metadata,
            },
        )
        return save_checkpoint(path or checkpoint_path(self.out_dir, iteration), checkpoint)

    def step(self, iteration: int) -> IterationMetrics:
        return self._train_iteration(
            self.experiment.env, self.experiment.pool, self.agents, self.experiment.scaler, self.config, iteration
        )

    def run(self, validate: bool = True) -> TrainingResult:
        """
        Train, appending one metrics row per iteration.

        The initial parameters are always checkpointed. Further checkpoints (and
        validation reports when `validate`) follow every validation_every
        iterations and after the last one.

        Raises:
            NonFiniteLossError: after writing an emergency checkpoint
        """
        result = TrainingResult()
        metrics_csv = CsvAppender(
            self.out_dir / "metrics.csv", METRIC_FIELDS, METRICS_SCHEMA, self.experiment.config_hash
        )
        result.metrics_path = metrics_csv.path
        result.checkpoints.append(self.save(0))

        total = self.config.iterations
        for iteration in range(total):
            try:
                metrics = self.step(iteration)
            except NonFiniteLossError as e:
                path = self.save(iteration, self.out_dir / "checkpoints" / "ckpt_emergency.json",
                                 diagnostics=e.diagnostics)
                logger.error(f"Training aborted at iteration {iteration}; emergency checkpoint {path}")
                raise
            metrics_csv.append(metrics.to_row())
            result.metrics.append(metrics)

            done = iteration + 1
            if done % self.config.validation_every == 0 or done == total:
                result.checkpoints.append(self.save(done))
                if validate:
                    report = self.validate(done)
                    result.reports.append(report.save(report_path(self.out_dir, done)))

        logger.info(f"Training finished: {total} iterations, outputs in {self.out_dir}")
        return result

    def validate(self, iteration: Optional[int] = None) -> ValidationReport:
        return self.validator.validate(self.agents, iteration)
