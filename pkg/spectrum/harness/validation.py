"""
Validation protocol - trained actors and the three baselines evaluated on the
same held-out configurations and channel realizations.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from spectrum.baselines.energy_detection import EdPolicy, adaptive_ed
from spectrum.baselines.pf_scheduler import PF_HARD_LIMIT, PfPolicy
from spectrum.config import BaselineKind
from spectrum.exceptions import ConfigurationError
from spectrum.harness.experiment import Experiment
from spectrum.mac.env import Policy
from spectrum.mac.trace import EpisodeTrace
from spectrum.rl.agents import AgentSet
from spectrum.rl.policies import ActionMode, RecurrentActorPolicy
from spectrum.utils.serialization import REPORT_SCHEMA, read_json, write_json

logger = logging.getLogger(__name__)

RL_METHOD = "rl"


@dataclass
class MethodResult:
    """One method on one configuration, averaged over realizations."""
    method: str
    configuration_index: int
    mean_cum_reward: float
    sum_rate: float
    max_rate: float
    log_utility: float
    collision_rate: float
    max_ue_rate: float
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ValidationReport:
    """Per-configuration results of every evaluated method."""
    config_hash: str
    iteration: Optional[int]
    n_bs: int
    configuration_indices: List[int]
    realizations: int
    gamma: float
    rows: List[MethodResult] = field(default_factory=list)
    skipped: Dict[str, str] = field(default_factory=dict)

    def methods(self) -> List[str]:
        return list(dict.fromkeys(row.method for row in self.rows))

    def rows_for(self, method: str) -> List[MethodResult]:
        return [row for row in self.rows if row.method == method]

    def summary(self) -> Dict[str, Dict[str, float]]:
        """Mean of each metric per method over configurations."""
        out = {}
        for method in self.methods():
            rows = self.rows_for(method)
            out[method] = {
                key: float(np.mean([getattr(row, key) for row in rows]))
                for key in ("mean_cum_reward", "sum_rate", "max_rate", "log_utility", "collision_rate")
            }
        return out

    def pf_over_ed(self) -> Dict[int, bool]:
        """Per configuration: does centralized PF collect at least the fixed-ED reward?"""
        pf = {row.configuration_index: row.mean_cum_reward for row in self.rows_for(BaselineKind.PF.value)}
        ed = {row.configuration_index: row.mean_cum_reward for row in self.rows_for(BaselineKind.ED.value)}
        return {k: pf[k] >= ed[k] for k in pf if k in ed}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["summary"] = self.summary()
        data["pf_over_ed"] = {str(k): v for k, v in self.pf_over_ed().items()}
        return data

    def save(self, path: Path | str) -> Path:
        payload = self.to_dict()
        payload.pop("config_hash")
        return write_json(path, payload, REPORT_SCHEMA, self.config_hash)

    @classmethod
    def load(cls, path: Path | str) -> "ValidationReport":
        try:
            data = read_json(path, REPORT_SCHEMA)
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"Cannot read validation report {path}: {e}") from e
        return cls(
            config_hash=data["config_hash"],
            iteration=data.get("iteration"),
            n_bs=int(data["n_bs"]),
            configuration_indices=list(data["configuration_indices"]),
            realizations=int(data["realizations"]),
            gamma=float(data["gamma"]),
            rows=[MethodResult(**row) for row in data.get("rows", [])],
            skipped=dict(data.get("skipped", {})),
        )


def summarize_traces(
    method: str, configuration_index: int, traces: List[EpisodeTrace], gamma: float, extra=None
) -> MethodResult:
    summaries = [trace.summary(gamma) for trace in traces]

    def mean(key: str) -> float:
        return float(np.mean([s[key] for s in summaries]))

    return MethodResult(
        method=method,
        configuration_index=configuration_index,
        mean_cum_reward=mean("cumulative_reward"),
        sum_rate=mean("sum_rate"),
        max_rate=mean("max_rate"),
        log_utility=mean("log_utility"),
        collision_rate=mean("collision_rate"),
        max_ue_rate=float(max(np.max(trace.rates) for trace in traces)),
        extra=dict(extra or {}),
    )


class Validator:
    """
    Runs the validation protocol of an experiment: a fixed set of held-out
    configurations, each evaluated over a fixed set of channel realizations.
    Baseline results do not change between checkpoints and are computed once.
    """

    def __init__(self, experiment: Experiment, force_pf: bool = False):
        self.experiment = experiment
        self.config = experiment.config
        self.force_pf = force_pf
        self.configuration_indices = experiment.pool.validation_indices(self.config.validation_configurations)
        self._baseline_rows: Optional[List[MethodResult]] = None
        self._skipped: Dict[str, str] = {}

        logger.info(
            f"Validator initialized: {len(self.configuration_indices)} configurations x "
            f"{self.config.validation_realizations} realizations"
        )

    def rollouts(self, policy: Policy, configuration_index: int) -> List[EpisodeTrace]:
        """Episodes of a policy on one configuration, one per realization."""
        env = self.experiment.env
        configuration = self.experiment.pool[configuration_index]
        traces = []
        for realization in range(self.config.validation_realizations):
            state = env.reset(configuration, self.config.seed, realization)
            trace = env.generate_episode(state, policy, self.config.episode_length)
            trace.config_hash = self.experiment.config_hash
            trace.configuration_index = configuration_index
            trace.seed = self.config.seed
            traces.append(trace)
        return traces

    def evaluate(self, method: str, policy: Policy) -> List[MethodResult]:
        return [
            summarize_traces(method, k, self.rollouts(policy, k), self.config.gamma)
            for k in self.configuration_indices
        ]

    def evaluate_agents(self, agents: AgentSet) -> List[MethodResult]:
        """Greedy (most likely action) rollouts of the trained actors."""
        policy = RecurrentActorPolicy(agents, self.experiment.scaler, ActionMode.GREEDY)
        return self.evaluate(RL_METHOD, policy)

    def evaluate_adaptive_ed(self) -> List[MethodResult]:
        """Genie threshold per configuration, chosen on the validation realizations themselves."""
        rows = []
        for k in self.configuration_indices:
            result = adaptive_ed(
                self.experiment.env,
                self.experiment.pool[k],
                self.config.adaptive_ed_thresholds_dbm,
                episodes_per_threshold=self.config.validation_realizations,
                gamma=self.config.gamma,
                length=self.config.episode_length,
                seed=self.config.seed,
            )
            traces = self.rollouts(EdPolicy(result.best_threshold_dbm), k)
            rows.append(summarize_traces(
                BaselineKind.ADAPTIVE_ED.value, k, traces, self.config.gamma,
                {"best_threshold_dbm": result.best_threshold_dbm},
            ))
        return rows

    def pf_skip_reason(self) -> Optional[str]:
        n = self.experiment.n_bs
        if n > PF_HARD_LIMIT:
            return f"N={n} exceeds the hard enumeration limit {PF_HARD_LIMIT}"
        if n > self.config.pf_max_bs and not self.force_pf:
            return f"N={n} exceeds pf_max_bs={self.config.pf_max_bs}"
        return None

    def baselines(self) -> List[MethodResult]:
        """Fixed ED, adaptive ED and (when enumerable) centralized PF."""
        if self._baseline_rows is None:
            rows = self.evaluate(BaselineKind.ED.value, EdPolicy(self.config.ed_threshold_dbm))
            rows += self.evaluate_adaptive_ed()
            reason = self.pf_skip_reason()
            if reason is None:
                rows += self.evaluate(BaselineKind.PF.value, PfPolicy(self.config.pf_max_bs, self.force_pf))
            else:
                logger.warning(f"Centralized PF baseline skipped: {reason}")
                self._skipped[BaselineKind.PF.value] = reason
            self._baseline_rows = rows
        return self._baseline_rows

    def validate(
        self, agents: Optional[AgentSet] = None, iteration: Optional[int] = None, baselines: bool = True
    ) -> ValidationReport:
        """
        Build a ValidationReport.

        Args:
            agents: Trained agents; None reports baselines only
            iteration: Training iteration of the checkpoint
            baselines: Include the baseline methods

        Returns:
            ValidationReport
        """
        rows: List[MethodResult] = []
        if agents is not None:
            rows += self.evaluate_agents(agents)
        if baselines:
            rows += self.baselines()
        report = ValidationReport(
            config_hash=self.experiment.config_hash,
            iteration=iteration,
            n_bs=self.experiment.n_bs,
            configuration_indices=list(self.configuration_indices),
            realizations=self.config.validation_realizations,
            gamma=self.config.gamma,
            rows=rows,
            skipped=dict(self._skipped) if baselines else {},
        )
        for method, values in report.summary().items():
            logger.info(f"Validation {method}: reward {values['mean_cum_reward']:.4f}, sum rate {values['sum_rate']:.4g}")
        return report
