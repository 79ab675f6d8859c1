"""
Test Harness - experiment configs, the training loop with its checkpoints
and reports, the validation protocol, baseline runs, plot export and the CLI.
"""

import json

import numpy as np
import pytest
from typer.testing import CliRunner

from spectrum.config import BaselineKind, ExperimentConfig
from spectrum.conftest import toy_config_dict
from spectrum.exceptions import CapabilityError, CheckpointError, ConfigurationError, NonFiniteLossError
from spectrum.harness.baselines_runner import run_baseline
from spectrum.harness.experiment import build_experiment
from spectrum.harness.plots import REWARD_FILE, THROUGHPUT_FILE, export_plots, read_metrics
from spectrum.harness.trainer import Trainer, checkpoint_path, load_agents
from spectrum.harness.validation import RL_METHOD, ValidationReport, Validator
from spectrum.main import app
from spectrum.neural.checkpoint import load_checkpoint
from spectrum.rl.agents import build_agents
from spectrum.utils.serialization import read_csv_rows

runner = CliRunner()


def experiment_for(**overrides):
    return build_experiment(ExperimentConfig.from_dict(toy_config_dict(**overrides)))


def write_config(path, **overrides):
    path.write_text(json.dumps(toy_config_dict(**overrides)))
    return path


class TestExperimentConfig:
    def test_file_round_trip(self, toy_config, tmp_path):
        toy_config.to_file(tmp_path / "exp.json")
        loaded = ExperimentConfig.from_file(tmp_path / "exp.json")
        assert loaded == toy_config
        assert loaded.config_hash() == toy_config.config_hash()

    def test_hash_tracks_every_field(self, toy_config):
        other = ExperimentConfig.from_dict(toy_config_dict(seed=1))
        assert other.config_hash() != toy_config.config_hash()

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"episode_lenght": 10})

    @pytest.mark.parametrize("field,value", [("tau", 1.0), ("gamma", 0.0), ("n_batch", 0), ("scenario", "rural")])
    def test_invalid_values(self, field, value):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({field: value})

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_file(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_file(bad)

    def test_epsilon_schedule(self):
        config = ExperimentConfig.from_dict({"epsilon_start": 1.0, "epsilon_end": 0.1, "epsilon_decay_iterations": 10})
        assert config.epsilon_at(0) == 1.0
        assert config.epsilon_at(5) == pytest.approx(0.55)
        assert config.epsilon_at(50) == pytest.approx(0.1)

    def test_k_trunc_defaults(self):
        assert ExperimentConfig().resolve_k_trunc(12) == 3
        assert ExperimentConfig.from_dict({"scenario": "umi_street_canyon"}).resolve_k_trunc(19) == 5
        assert ExperimentConfig.from_dict(toy_config_dict()).resolve_k_trunc(4) == 3

    def test_desk_profile(self):
        config = ExperimentConfig.desk_profile(seed=3)
        assert config.episode_length == 100 and config.n_batch == 2 and config.seed == 3


class TestTrainer:
    def test_zero_iterations(self, tmp_path):
        result = Trainer(experiment_for(iterations=0), tmp_path).run()
        assert result.metrics == []
        assert result.checkpoints == [checkpoint_path(tmp_path, 0)]
        assert read_csv_rows(result.metrics_path) == []

    def test_outputs(self, tmp_path):
        experiment = experiment_for()
        result = Trainer(experiment, tmp_path).run()
        assert [p.name for p in result.checkpoints] == ["ckpt_0000.json", "ckpt_0001.json", "ckpt_0002.json"]
        assert [p.name for p in result.reports] == ["report_0001.json", "report_0002.json"]

        rows = read_csv_rows(result.metrics_path)
        assert [int(r["iteration"]) for r in rows] == [0, 1]
        assert result.metrics_path.read_text().startswith(f"# schema=metrics-v1 config_hash={experiment.config_hash}")

        checkpoint = load_checkpoint(result.checkpoints[-1], experiment.config_hash)
        assert checkpoint.iteration == 2
        assert checkpoint.metadata["n_bs"] == 4

        report = ValidationReport.load(result.reports[-1])
        assert report.iteration == 2
        assert set(report.methods()) == {RL_METHOD, "ed", "adaptive-ed", "pf"}

    def test_metrics_are_reproducible(self, tmp_path):
        first = Trainer(experiment_for(), tmp_path / "a").run(validate=False)
        second = Trainer(experiment_for(), tmp_path / "b").run(validate=False)
        assert read_csv_rows(first.metrics_path) == read_csv_rows(second.metrics_path)
        assert first.reports == [] and second.reports == []

    def test_dqn_run(self, tmp_path):
        result = Trainer(experiment_for(algorithm="dqn", iterations=1), tmp_path).run(validate=False)
        row = read_csv_rows(result.metrics_path)[0]
        assert row["loss_q_con"] != "" and row["loss_policy"] == ""

    def test_emergency_checkpoint(self, tmp_path, monkeypatch):
        trainer = Trainer(experiment_for(), tmp_path)

        def diverge(iteration):
            raise NonFiniteLossError("Non-finite training loss", {"network": "agent0.pi_con"})

        monkeypatch.setattr(trainer, "step", diverge)
        with pytest.raises(NonFiniteLossError):
            trainer.run()
        emergency = load_checkpoint(tmp_path / "checkpoints" / "ckpt_emergency.json")
        assert emergency.metadata["diagnostics"] == {"network": "agent0.pi_con"}

    def test_restore_agents(self, tmp_path):
        experiment = experiment_for(iterations=1)
        trainer = Trainer(experiment, tmp_path)
        trainer.run(validate=False)
        restored = load_agents(checkpoint_path(tmp_path, 1), experiment)
        assert np.array_equal(restored[1].actor.params, trainer.agents[1].actor.params)

    def test_restore_needs_matching_config(self, tmp_path):
        trainer = Trainer(experiment_for(iterations=0), tmp_path)
        trainer.run()
        with pytest.raises(CheckpointError):
            load_agents(checkpoint_path(tmp_path, 0), experiment_for(iterations=0, seed=9))


class TestValidation:
    def test_bounds_and_methods(self, toy_experiment):
        agents = build_agents(toy_experiment.config, toy_experiment.n_bs)
        report = Validator(toy_experiment).validate(agents, iteration=0)
        assert report.configuration_indices == [48, 49]
        peak = toy_experiment.config.bandwidth_hz * 8.0
        for row in report.rows:
            assert 0.0 <= row.max_ue_rate <= peak
            assert row.max_rate <= row.sum_rate <= toy_experiment.n_bs * peak
            assert 0.0 <= row.collision_rate <= 1.0
        assert set(report.pf_over_ed()) == {48, 49}

    def test_repeatable(self, toy_experiment, tmp_path):
        agents = build_agents(toy_experiment.config, toy_experiment.n_bs)
        first = Validator(toy_experiment).validate(agents, iteration=0)
        second = Validator(toy_experiment).validate(agents, iteration=0)
        assert first.summary() == second.summary()
        a = first.save(tmp_path / "a.json").read_bytes()
        b = second.save(tmp_path / "b.json").read_bytes()
        assert a == b

    def test_pf_skipped_for_large_networks(self):
        report = Validator(experiment_for(pf_max_bs=3)).validate()
        assert "pf" not in report.methods()
        assert "pf_max_bs=3" in report.skipped["pf"]

    def test_forced_pf(self):
        report = Validator(experiment_for(pf_max_bs=3), force_pf=True).validate()
        assert "pf" in report.methods()

    def test_adaptive_threshold_recorded(self, toy_experiment):
        rows = Validator(toy_experiment).evaluate_adaptive_ed()
        assert all(row.extra["best_threshold_dbm"] in (-52.0, -72.0, -92.0) for row in rows)

    def test_report_round_trip(self, toy_experiment, tmp_path):
        report = Validator(toy_experiment).validate(iteration=3)
        loaded = ValidationReport.load(report.save(tmp_path / "report.json"))
        assert loaded.rows == report.rows
        assert loaded.config_hash == toy_experiment.config_hash
        with pytest.raises(ConfigurationError):
            ValidationReport.load(tmp_path / "missing.json")


class TestBaselineRunner:
    def test_ed_outputs(self, toy_experiment, tmp_path):
        run = run_baseline(toy_experiment, BaselineKind.ED, tmp_path)
        assert run.report_path.name == "baseline_ed.json"
        assert run.trace_path.name == "baseline_ed_trace.jsonl"
        assert ValidationReport.load(run.report_path).methods() == ["ed"]

    def test_adaptive_ed(self, toy_experiment, tmp_path):
        run = run_baseline(toy_experiment, BaselineKind.ADAPTIVE_ED, tmp_path)
        assert run.report_path.name == "baseline_adaptive_ed.json"
        assert len(run.rows) == 2

    def test_pf_limits(self, tmp_path):
        experiment = experiment_for(pf_max_bs=3)
        with pytest.raises(CapabilityError):
            run_baseline(experiment, BaselineKind.PF, tmp_path)
        assert run_baseline(experiment, BaselineKind.PF, tmp_path, force=True).report.methods() == ["pf"]


class TestPlotExport:
    @pytest.fixture
    def run_dir(self, tmp_path):
        Trainer(experiment_for(), tmp_path / "run").run()
        return tmp_path / "run"

    def test_tables(self, run_dir, tmp_path):
        reports = sorted((run_dir / "reports").glob("*.json"))
        written = export_plots({"ppo": run_dir / "metrics.csv"}, {"ppo": reports}, tmp_path / "plots")
        assert [p.name for p in written] == [REWARD_FILE, THROUGHPUT_FILE]
        reward = read_csv_rows(tmp_path / "plots" / REWARD_FILE)
        series = {row["series"] for row in reward}
        assert {"ppo", "ppo:validation", "ed", "adaptive-ed", "pf"} <= series
        throughput = {row["series"] for row in read_csv_rows(tmp_path / "plots" / THROUGHPUT_FILE)}
        assert {"ppo:sum_rate", "ppo:max_rate"} <= throughput

    def test_series_filter(self, run_dir, tmp_path):
        export_plots({"ppo": run_dir / "metrics.csv"}, out_dir=tmp_path / "plots", series=["ppo"])
        series = {row["series"] for row in read_csv_rows(tmp_path / "plots" / THROUGHPUT_FILE)}
        assert series == {"ppo:sum_rate", "ppo:max_rate"}

    def test_png(self, run_dir, tmp_path):
        written = export_plots({"ppo": run_dir / "metrics.csv"}, out_dir=tmp_path / "plots", png=True)
        assert all(p.exists() and p.stat().st_size > 0 for p in written)
        assert (tmp_path / "plots" / "reward_curves.png").exists()

    def test_malformed_metrics(self, tmp_path):
        bad = tmp_path / "metrics.csv"
        bad.write_text("iteration,mean_cum_reward\n0,abc\n")
        with pytest.raises(ConfigurationError):
            read_metrics(bad)
        with pytest.raises(ConfigurationError):
            export_plots({"x": tmp_path / "missing.csv"}, out_dir=tmp_path)


class TestCli:
    def test_train_and_validate(self, tmp_path):
        config = write_config(tmp_path / "exp.json", iterations=1)
        out = tmp_path / "run"
        result = runner.invoke(app, ["train", "--config", str(config), "--out-dir", str(out), "--no-validate"])
        assert result.exit_code == 0, result.output
        assert (out / "config.json").exists()
        assert (out / "checkpoints" / "ckpt_0001.json").exists()

        result = runner.invoke(app, [
            "validate", str(out / "checkpoints" / "ckpt_0001.json"),
            "--config", str(config), "--out-dir", str(tmp_path / "val"),
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "val" / "report_ckpt_0001.json").exists()

    def test_train_zero_iterations(self, tmp_path):
        config = write_config(tmp_path / "exp.json", iterations=0)
        result = runner.invoke(app, ["train", "--config", str(config), "--out-dir", str(tmp_path / "run")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "run" / "checkpoints" / "ckpt_0000.json").exists()

    def test_bad_config_exits_2(self, tmp_path):
        bad = tmp_path / "exp.json"
        bad.write_text(json.dumps({"tau": 0.5}))
        result = runner.invoke(app, ["train", "--config", str(bad), "--out-dir", str(tmp_path)])
        assert result.exit_code == 2

    def test_divergence_exits_3(self, tmp_path, monkeypatch):
        def diverge(self, validate=True):
            raise NonFiniteLossError("Non-finite training loss", {"network": "agent0.v_con"})

        monkeypatch.setattr(Trainer, "run", diverge)
        config = write_config(tmp_path / "exp.json")
        result = runner.invoke(app, ["train", "--config", str(config), "--out-dir", str(tmp_path / "run")])
        assert result.exit_code == 3

    def test_wrong_checkpoint_exits_2(self, tmp_path):
        config = write_config(tmp_path / "exp.json")
        result = runner.invoke(app, ["validate", str(tmp_path / "missing.json"), "--config", str(config)])
        assert result.exit_code == 2

    def test_baseline(self, tmp_path):
        config = write_config(tmp_path / "exp.json", pf_max_bs=3)
        result = runner.invoke(app, ["baseline", "--kind", "ed", "--config", str(config), "--out-dir", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "baseline_ed.json").exists()
        result = runner.invoke(app, ["baseline", "--kind", "pf", "--config", str(config), "--out-dir", str(tmp_path)])
        assert result.exit_code == 2

    def test_gen_layout(self, tmp_path):
        result = runner.invoke(app, ["gen-layout", "--scenario", "umi_street_canyon", "--out-dir", str(tmp_path)])
        assert result.exit_code == 0, result.output
        data = json.loads((tmp_path / "layout_umi_street_canyon.json").read_text())
        assert data["schema"] == "layout-v1"
        assert len(data["bs_positions"]) == 19

    def test_ser_curve(self, tmp_path):
        args = ["modem", "ser-curve", "--order", "16", "--symbols", "0", "--sinr-max-db", "10", "--out-dir", str(tmp_path)]
        result = runner.invoke(app, args)
        assert result.exit_code == 0, result.output
        rows = read_csv_rows(tmp_path / "ser_16.csv")
        assert [float(r["sinr_db"]) for r in rows] == [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
        assert len(read_csv_rows(tmp_path / "constellation_16.csv")) == 16

    def test_unsupported_order_exits_2(self, tmp_path):
        result = runner.invoke(app, ["modem", "ser-curve", "--order", "12", "--out-dir", str(tmp_path)])
        assert result.exit_code == 2

    def test_export_plots_needs_labels(self, tmp_path):
        result = runner.invoke(app, ["export-plots", "--metrics", "no-label.csv", "--out-dir", str(tmp_path)])
        assert result.exit_code == 2
