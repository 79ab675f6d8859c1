"""
Plot data export - tidy (iteration, series, value) tables for reward and
throughput curves, optionally rendered as PNGs.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from spectrum.exceptions import ConfigurationError
from spectrum.harness.validation import RL_METHOD, ValidationReport
from spectrum.utils.serialization import PLOTS_SCHEMA, CsvAppender, read_csv_rows

logger = logging.getLogger(__name__)

PLOT_FIELDS = ("iteration", "series", "value")
REWARD_FILE = "reward_curves.csv"
THROUGHPUT_FILE = "throughput_curves.csv"

Point = Tuple[int, str, float]


@dataclass
class PlotTables:
    reward: List[Point] = field(default_factory=list)
    throughput: List[Point] = field(default_factory=list)

    def series(self) -> List[str]:
        return list(dict.fromkeys(name for _, name, _ in self.reward + self.throughput))


def _number(row: Dict[str, str], key: str, path: Path) -> float:
    try:
        return float(row[key])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"{path}: malformed metrics row, column {key!r}: {row}") from e


def read_metrics(path: Path | str) -> List[Dict[str, float]]:
    """
    Read a metrics CSV.

    Raises:
        ConfigurationError: missing file or malformed rows
    """
    path = Path(path)
    try:
        rows = read_csv_rows(path)
    except OSError as e:
        raise ConfigurationError(f"Cannot read metrics file {path}: {e}") from e
    return [
        {key: _number(row, key, path) for key in ("iteration", "mean_cum_reward", "sum_rate", "max_rate")}
        for row in rows
    ]


def build_tables(
    metrics: Dict[str, Sequence[Dict[str, float]]],
    reports: Dict[str, Sequence[ValidationReport]],
) -> PlotTables:
    """
    Assemble curve tables.

    Args:
        metrics: series label -> metrics rows of a training run
        reports: series label -> validation reports of that run

    Baseline methods in the reports become horizontal lines over every
    iteration that appears in the tables.
    """
    tables = PlotTables()
    iterations = set()
    for label, rows in metrics.items():
        for row in rows:
            it = int(row["iteration"])
            iterations.add(it)
            tables.reward.append((it, label, row["mean_cum_reward"]))
            tables.throughput.append((it, f"{label}:sum_rate", row["sum_rate"]))
            tables.throughput.append((it, f"{label}:max_rate", row["max_rate"]))

    baselines: Dict[str, Dict[str, float]] = {}
    for label, label_reports in reports.items():
        for report in label_reports:
            summary = report.summary()
            if RL_METHOD in summary and report.iteration is not None:
                iterations.add(report.iteration)
                values = summary[RL_METHOD]
                tables.reward.append((report.iteration, f"{label}:validation", values["mean_cum_reward"]))
                tables.throughput.append((report.iteration, f"{label}:validation:sum_rate", values["sum_rate"]))
            for method, values in summary.items():
                if method != RL_METHOD:
                    baselines.setdefault(method, values)

    for method, values in baselines.items():
        for it in sorted(iterations):
            tables.reward.append((it, method, values["mean_cum_reward"]))
            tables.throughput.append((it, f"{method}:sum_rate", values["sum_rate"]))

    return tables


def filter_series(tables: PlotTables, wanted: Optional[Iterable[str]]) -> PlotTables:
    """Keep only the requested series (a label keeps its derived throughput series too)."""
    if not wanted:
        return tables
    wanted = set(wanted)

    def keep(name: str) -> bool:
        return name in wanted or name.split(":")[0] in wanted

    return PlotTables(
        [p for p in tables.reward if keep(p[1])],
        [p for p in tables.throughput if keep(p[1])],
    )


def write_table(path: Path, points: Sequence[Point], config_hash: Optional[str]) -> Path:
    table = CsvAppender(path, PLOT_FIELDS, PLOTS_SCHEMA, config_hash)
    for iteration, series, value in sorted(points, key=lambda p: (p[1], p[0])):
        table.append({"iteration": iteration, "series": series, "value": value})
    return path


def render_png(path: Path, points: Sequence[Point], ylabel: str) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grouped = defaultdict(list)
    for iteration, series, value in sorted(points):
        grouped[series].append((iteration, value))

    fig, ax = plt.subplots(figsize=(7, 4))
    for series, values in grouped.items():
        xs, ys = zip(*values)
        ax.plot(xs, ys, label=series)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if grouped:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def export_plots(
    metrics_files: Dict[str, Path | str],
    report_files: Optional[Dict[str, Sequence[Path | str]]] = None,
    out_dir: Path | str = ".",
    series: Optional[Iterable[str]] = None,
    png: bool = False,
    config_hash: Optional[str] = None,
) -> List[Path]:
    """
    Write reward and throughput tables (and PNGs when `png`).

    Args:
        metrics_files: series label -> metrics CSV
        report_files: series label -> validation report files
        out_dir: Output directory
        series: Restrict output to these series names
        png: Also render PNG figures
        config_hash: Hash stamped into the tables

    Returns:
        Paths written

    Raises:
        ConfigurationError: malformed input file
    """
    out_dir = Path(out_dir)
    metrics = {label: read_metrics(path) for label, path in metrics_files.items()}
    reports = {
        label: [ValidationReport.load(path) for path in paths]
        for label, paths in (report_files or {}).items()
    }
    tables = filter_series(build_tables(metrics, reports), series)

    written = [
        write_table(out_dir / REWARD_FILE, tables.reward, config_hash),
        write_table(out_dir / THROUGHPUT_FILE, tables.throughput, config_hash),
    ]
    if png:
        written.append(render_png(out_dir / "reward_curves.png", tables.reward, "cumulative reward"))
        written.append(render_png(out_dir / "throughput_curves.png", tables.throughput, "rate (bit/s)"))
    logger.info(f"Plot data exported: {len(tables.series())} series to {out_dir}")
    return written
