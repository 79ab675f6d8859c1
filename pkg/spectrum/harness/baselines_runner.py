"""Stand-alone baseline runs on the validation configurations."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from spectrum.baselines.energy_detection import EdPolicy
from spectrum.baselines.pf_scheduler import PfPolicy
from spectrum.config import BaselineKind
from spectrum.exceptions import CapabilityError
from spectrum.harness.experiment import Experiment
from spectrum.harness.validation import MethodResult, ValidationReport, Validator

logger = logging.getLogger(__name__)


@dataclass
class BaselineRun:
    kind: BaselineKind
    report: ValidationReport
    trace_path: Optional[Path] = None
    report_path: Optional[Path] = None
    rows: List[MethodResult] = field(default_factory=list)


def run_baseline(
    experiment: Experiment,
    kind: BaselineKind,
    out_dir: Path | str,
    force: bool = False,
) -> BaselineRun:
    """
    Evaluate one baseline with the validation protocol.

    Writes `baseline_<kind>.json` (report-v1) and the trace of the first
    configuration's first realization as `baseline_<kind>_trace.jsonl`.

    Raises:
        CapabilityError: PF requested for a network too large to enumerate
    """
    kind = BaselineKind(kind)
    config = experiment.config
    out_dir = Path(out_dir)
    validator = Validator(experiment, force_pf=force)

    if kind == BaselineKind.ED:
        policy = EdPolicy(config.ed_threshold_dbm)
        rows = validator.evaluate(kind.value, policy)
    elif kind == BaselineKind.ADAPTIVE_ED:
        rows = validator.evaluate_adaptive_ed()
        policy = EdPolicy(rows[0].extra["best_threshold_dbm"])
    else:
        reason = validator.pf_skip_reason()
        if reason is not None:
            raise CapabilityError(f"Centralized PF refused: {reason}")
        policy = PfPolicy(config.pf_max_bs, force)
        rows = validator.evaluate(kind.value, policy)

    report = ValidationReport(
        config_hash=experiment.config_hash,
        iteration=None,
        n_bs=experiment.n_bs,
        configuration_indices=list(validator.configuration_indices),
        realizations=config.validation_realizations,
        gamma=config.gamma,
        rows=rows,
    )
    first = validator.configuration_indices[0]
    trace = validator.rollouts(policy, first)[0]
    name = kind.value.replace("-", "_")
    run = BaselineRun(kind, report, rows=rows)
    run.trace_path = trace.to_jsonl(out_dir / f"baseline_{name}_trace.jsonl", config.gamma)
    run.report_path = report.save(out_dir / f"baseline_{name}.json")
    logger.info(f"Baseline {kind.value}: reward {report.summary()[kind.value]['mean_cum_reward']:.4f}")
    return run
