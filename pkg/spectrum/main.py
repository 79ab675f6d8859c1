"""
Command-line entry point for Spectrum Sharing Lab.

    python -m spectrum.main train --config exp.json --out-dir runs/ppo
    python -m spectrum.main validate runs/ppo/checkpoints/ckpt_0100.json --config exp.json
    python -m spectrum.main baseline --kind adaptive-ed --config exp.json
    python -m spectrum.main export-plots --metrics ppo=runs/ppo/metrics.csv
    python -m spectrum.main gen-layout --scenario umi_street_canyon
    python -m spectrum.main modem ser-curve --order 16

Exit codes: 0 success, 2 configuration or input error, 3 non-finite training loss.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from spectrum.channel.layout import save_layout
from spectrum.config import BaselineKind, ExperimentConfig, Scenario, settings
from spectrum.exceptions import (
    CapabilityError,
    CheckpointError,
    ConfigurationError,
    ContractViolation,
    NonFiniteLossError,
)
from spectrum.harness.baselines_runner import run_baseline
from spectrum.harness.experiment import build_experiment, build_layout
from spectrum.harness.plots import export_plots
from spectrum.harness.trainer import Trainer, load_agents
from spectrum.harness.validation import ValidationReport, Validator
from spectrum.modem.constellation import build_constellation, scheme_for_order, write_constellation_csv
from spectrum.modem.ser import ser_curve
from spectrum.utils.logging_setup import configure_logging
from spectrum.utils.rng import stream
from spectrum.utils.serialization import SER_CURVE_SCHEMA, CsvAppender

logger = logging.getLogger(__name__)
console = Console()

EXIT_INPUT = 2
EXIT_NON_FINITE = 3

app = typer.Typer(name="spectrum", help=f"{settings.APP_NAME} v{settings.APP_VERSION}", add_completion=False)
modem_app = typer.Typer(help="Constellations and symbol error rates")
app.add_typer(modem_app, name="modem")


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Override LOG_LEVEL"),
):
    configure_logging(level=log_level)


def _guarded(action: Callable[[], None]) -> None:
    """Run a command body and map library errors onto exit codes."""
    try:
        action()
    except NonFiniteLossError as e:
        logger.error(f"Training diverged: {e}")
        console.print(f"[red]Training diverged:[/red] {e}")
        raise typer.Exit(code=EXIT_NON_FINITE)
    except (ConfigurationError, CheckpointError, CapabilityError, ContractViolation) as e:
        logger.error(f"{type(e).__name__}: {e}")
        console.print(f"[red]{type(e).__name__}:[/red] {e}")
        raise typer.Exit(code=EXIT_INPUT)


def load_config(path: Optional[Path], seed: Optional[int] = None) -> ExperimentConfig:
    """Config from file (defaults when no file is given), with an optional seed override."""
    config = ExperimentConfig.from_file(path) if path else ExperimentConfig()
    if seed is not None:
        data = config.model_dump(mode="json")
        data["seed"] = seed
        config = ExperimentConfig.from_dict(data)
    return config


def _out_dir(out_dir: Optional[Path]) -> Path:
    path = Path(out_dir or settings.OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _summary_table(title: str, report: ValidationReport) -> Table:
    table = Table(title=title)
    for column in ("method", "reward", "sum rate (bit/s)", "max rate (bit/s)", "collisions"):
        table.add_column(column)
    for method, values in report.summary().items():
        table.add_row(
            method,
            f"{values['mean_cum_reward']:.4f}",
            f"{values['sum_rate']:.4g}",
            f"{values['max_rate']:.4g}",
            f"{values['collision_rate']:.3f}",
        )
    return table


def _labelled(values: List[str], option: str) -> Dict[str, List[Path]]:
    out: Dict[str, List[Path]] = {}
    for value in values:
        label, sep, path = value.partition("=")
        if not sep or not label or not path:
            raise ConfigurationError(f"{option} expects LABEL=PATH, got {value!r}")
        out.setdefault(label, []).append(Path(path))
    return out


@app.command()
def train(
    config: Optional[Path] = typer.Option(None, "--config", help="Experiment config JSON"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the config seed"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", help="Output directory"),
    validate: bool = typer.Option(True, "--validate/--no-validate", help="Write validation reports"),
):
    """Train DQN or PPO agents; writes checkpoints, metrics.csv and reports."""

    def run():
        cfg = load_config(config, seed)
        out = _out_dir(out_dir)
        cfg.to_file(out / "config.json")
        result = Trainer(build_experiment(cfg), out).run(validate=validate)
        console.print(
            f"[green]Done:[/green] {len(result.metrics)} iterations, "
            f"{len(result.checkpoints)} checkpoints, metrics in {result.metrics_path}"
        )

    _guarded(run)


@app.command("validate")
def validate_cmd(
    checkpoint: Path = typer.Argument(..., help="Checkpoint file"),
    config: Optional[Path] = typer.Option(None, "--config"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
    force_pf: bool = typer.Option(False, "--force-pf", help="Enumerate PF above pf_max_bs"),
):
    """Greedy rollouts of a checkpoint next to the three baselines."""

    def run():
        cfg = load_config(config, seed)
        experiment = build_experiment(cfg)
        agents = load_agents(checkpoint, experiment)
        report = Validator(experiment, force_pf=force_pf).validate(agents)
        path = report.save(_out_dir(out_dir) / f"report_{checkpoint.stem}.json")
        console.print(_summary_table(f"Validation of {checkpoint.name}", report))
        console.print(f"Report written to {path}")

    _guarded(run)


@app.command()
def baseline(
    kind: BaselineKind = typer.Option(BaselineKind.ED, "--kind", case_sensitive=False),
    config: Optional[Path] = typer.Option(None, "--config"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
    force: bool = typer.Option(False, "--force", help="Allow PF enumeration above pf_max_bs"),
):
    """Run one baseline with the validation protocol."""

    def run():
        cfg = load_config(config, seed)
        result = run_baseline(build_experiment(cfg), kind, _out_dir(out_dir), force)
        console.print(_summary_table(f"Baseline {kind.value}", result.report))
        if kind == BaselineKind.ADAPTIVE_ED:
            for row in result.rows:
                console.print(f"configuration {row.configuration_index}: {row.extra['best_threshold_dbm']:g} dBm")
        console.print(f"Report written to {result.report_path}")

    _guarded(run)


@app.command("export-plots")
def export_plots_cmd(
    metrics: List[str] = typer.Option([], "--metrics", help="LABEL=metrics.csv, repeatable"),
    report: List[str] = typer.Option([], "--report", help="LABEL=report.json, repeatable"),
    series: List[str] = typer.Option([], "--series", help="Only export these series"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
    png: bool = typer.Option(False, "--png", help="Also render PNG figures"),
):
    """Tidy (iteration, series, value) tables for reward and throughput curves."""

    def run():
        metrics_files = {label: paths[-1] for label, paths in _labelled(metrics, "--metrics").items()}
        written = export_plots(metrics_files, _labelled(report, "--report"), _out_dir(out_dir), series or None, png)
        for path in written:
            console.print(f"Wrote {path}")

    _guarded(run)


@app.command("gen-layout")
def gen_layout(
    scenario: Optional[Scenario] = typer.Option(None, "--scenario", case_sensitive=False),
    config: Optional[Path] = typer.Option(None, "--config"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
    configuration: Optional[int] = typer.Option(0, "--configuration", help="Pool index of the UE placement to include"),
):
    """Write a layout (and one UE configuration) as layout-v1 JSON."""

    def run():
        cfg = load_config(config, seed)
        if scenario is not None:
            data = cfg.model_dump(mode="json")
            data["scenario"] = scenario.value
            cfg = ExperimentConfig.from_dict(data)
        experiment = build_experiment(cfg, build_layout(cfg))
        placement = experiment.pool[configuration] if configuration is not None else None
        path = save_layout(
            _out_dir(out_dir) / f"layout_{cfg.scenario.value}.json", experiment.layout, placement, cfg.seed
        )
        console.print(f"{experiment.n_bs} BSs written to {path}")

    _guarded(run)


@modem_app.command("ser-curve")
def ser_curve_cmd(
    order: int = typer.Option(16, "--order", help="Modulation order 4..256"),
    sinr_min_db: float = typer.Option(0.0, "--sinr-min-db"),
    sinr_max_db: float = typer.Option(30.0, "--sinr-max-db"),
    sinr_step_db: float = typer.Option(2.0, "--sinr-step-db"),
    symbols: int = typer.Option(100000, "--symbols", help="Monte-Carlo symbols per point, 0 disables"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
):
    """Analytic and Monte-Carlo SER over an SINR grid, plus the constellation."""

    def run():
        if sinr_step_db <= 0 or sinr_max_db < sinr_min_db:
            raise ConfigurationError("SINR grid needs step > 0 and max >= min")
        scheme = scheme_for_order(order)
        grid = np.arange(sinr_min_db, sinr_max_db + 0.5 * sinr_step_db, sinr_step_db)
        rows = ser_curve(scheme, grid, symbols, stream(seed, "ser-curve", order))
        out = _out_dir(out_dir)
        table_csv = CsvAppender(out / f"ser_{order}.csv", ["sinr_db", "ser_analytic", "ser_mc"], SER_CURVE_SCHEMA, None)
        table = Table(title=f"SER of {scheme}")
        for column in ("SINR (dB)", "analytic", "Monte-Carlo"):
            table.add_column(column)
        for row in rows:
            table_csv.append(row)
            table.add_row(f"{row['sinr_db']:.1f}", f"{row['ser_analytic']:.3e}", f"{row['ser_mc']:.3e}")
        write_constellation_csv(out / f"constellation_{order}.csv", build_constellation(scheme))
        console.print(table)
        console.print(f"Wrote {table_csv.path}")

    _guarded(run)


if __name__ == "__main__":
    app()
