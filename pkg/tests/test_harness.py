import logging
import math
from fractions import Fraction

import numpy as np
import pytest

from shared_autonomy.cli import main
from shared_autonomy.config import config_echo, config_from_mapping, parse_config_text
from shared_autonomy.errors import ConfigError, ParseError
from shared_autonomy.harness import (
    MetricsRow,
    analyze_ft,
    eval_recovery,
    read_csv,
    run_experiment,
    run_replicate,
    write_csv,
    write_ft_log,
)
from shared_autonomy.human import HumanProfile
from shared_autonomy.learner import ConstraintModel, load_checkpoint

TINY = """
env.horizon = 3
grid.state_points = 11
grid.action_points = 5
experiment.episodes = 4
experiment.eval_every = 2
experiment.eval_points = 101
"""


class TestConfig:
    def test_defaults(self):
        cfg = parse_config_text("")
        assert cfg.env.horizon == 20
        assert list(cfg.profiles) == ["default"]
        assert cfg.robot_upper == (1.0,)

    def test_values(self, recovery_cfg):
        assert recovery_cfg.learner.lr == 0.5
        assert recovery_cfg.profile.capability == (0.4,)
        assert recovery_cfg.episodes == 300

    @pytest.mark.parametrize("text, field", [
        ("env.speed = 1", "env.speed"),
        ("human.alice.height = 2", "human.alice.height"),
        ("env.dt = -1", "env.dt"),
        ("env.dt = fast", "env.dt"),
        ("learner.lr = 0", "learner.lr"),
        ("agent.fallback = halt", "agent.fallback"),
        ("experiment.episodes = 0", "experiment.episodes"),
        ("human.capability = 0.4\nhuman.bob.capability = 0.3", "human"),
        ("env.dt = 0.1\nenv.dt = 0.2", "env.dt"),
    ])
    def test_errors_name_field(self, text, field):
        with pytest.raises(ConfigError) as exc:
            parse_config_text(text)
        assert exc.value.field == field

    def test_named_profiles(self):
        cfg = parse_config_text("human.weak.capability = 0.3\nhuman.strong.capability = 0.7")
        assert {n: p.capability for n, p in cfg.profiles.items()} == {"weak": (0.3,), "strong": (0.7,)}

    def test_echo_round_trip(self, recovery_cfg):
        assert config_from_mapping(config_echo(recovery_cfg)) == recovery_cfg


class TestCsv:
    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv([], path, ["a", "b"])
        assert path.read_text() == "a,b\n"

    def test_round_trip(self, tmp_path):
        rows = [MetricsRow(0, -1 / 3, 2.5, 4, 0.41, None), MetricsRow(1, -0.1, 0.0, 0, 0.4, 0.975)]
        path = tmp_path / "m.csv"
        write_csv(rows, path)
        back = read_csv(path)
        assert back[0]["accuracy"] == ""
        assert float(back[0]["reward"]) == -1 / 3
        assert float(back[1]["accuracy"]) == 0.975
        assert int(back[1]["episode"]) == 1


def ft_oracle(runs, n_runs):
    """Exact mean/sample-std with rationals, runs truncated to the shortest."""
    chosen = list(runs.values())[:n_runs]
    length = min(len(v) for v in chosen)
    out = {}
    for c in range(6):
        for k in range(length):
            xs = [Fraction(float(v[k][c])) for v in chosen]
            mean = sum(xs) / len(xs)
            var = sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)
            out[(c, k)] = (float(mean), math.sqrt(float(var)))
    return out


class TestAnalyzeFt:
    def test_matches_oracle(self, tmp_path):
        rng = np.random.default_rng(4)
        runs = {f"r{i}": rng.normal(0, 5, (30 + i, 6)) for i in range(6)}
        path = tmp_path / "ft.csv"
        write_ft_log(path, runs)
        rows = analyze_ft(path, 5)
        expected = ft_oracle(runs, 5)
        assert len(rows) == 6 * 30
        channels = ["fx", "fy", "fz", "tx", "ty", "tz"]
        for row in rows:
            mean, std = expected[(channels.index(row.channel), row.t)]
            assert abs(row.mean - mean) <= 1e-12
            assert abs(row.std - std) <= 1e-12

    def test_constant_channel(self, tmp_path):
        runs = {i: np.full((5, 6), 2.0) for i in range(5)}
        path = tmp_path / "ft.csv"
        write_ft_log(path, runs)
        rows = analyze_ft(path, 5)
        assert all(r.mean == 2.0 and r.std == 0.0 for r in rows)

    def test_two_point_std(self, tmp_path):
        path = tmp_path / "ft.csv"
        write_ft_log(path, {"a": np.ones((1, 6)), "b": np.full((1, 6), 3.0)})
        row = analyze_ft(path, 2)[0]
        assert row.mean == 2.0
        assert row.std == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_single_run_warns(self, tmp_path, caplog):
        path = tmp_path / "ft.csv"
        write_ft_log(path, {"a": np.arange(12.0).reshape(2, 6)})
        with caplog.at_level(logging.WARNING):
            rows = analyze_ft(path, 1)
        assert all(r.std == 0.0 for r in rows)
        assert "single run" in caplog.text

    def test_bad_row_line_number(self, tmp_path):
        path = tmp_path / "ft.csv"
        path.write_text("run,t,fx,fy,fz,tx,ty,tz\na,0,1,2,3,4,5,6\na,1,1,2,x,4,5,6\n")
        with pytest.raises(ParseError) as exc:
            analyze_ft(path, 1)
        assert exc.value.line == 3

    def test_decreasing_timestamp(self, tmp_path):
        path = tmp_path / "ft.csv"
        path.write_text("a,1,1,2,3,4,5,6\na,0,1,2,3,4,5,6\n")
        with pytest.raises(ParseError) as exc:
            analyze_ft(path, 1)
        assert exc.value.line == 2

    def test_too_few_runs(self, tmp_path):
        path = tmp_path / "ft.csv"
        write_ft_log(path, {"a": np.ones((2, 6))})
        with pytest.raises(ParseError):
            analyze_ft(path, 3)


class TestExperiment:
    def test_single_step_counting(self, tmp_path):
        cfg = parse_config_text(TINY.replace("env.horizon = 3", "env.horizon = 1")
                                .replace("experiment.episodes = 4", "experiment.episodes = 1"))
        results = run_experiment(cfg, tmp_path)
        rows, model = results["default"]
        assert len(rows) == 1 and model.samples_seen == 1
        assert len(read_csv(tmp_path / "metrics.csv")) == 1
        assert load_checkpoint(tmp_path / "model.ckpt")[0].samples_seen == 1

    def test_rows_and_checkpoints(self, tmp_path):
        cfg = parse_config_text(TINY)
        rows, model = run_experiment(cfg, tmp_path)["default"]
        assert [r.episode for r in rows] == [0, 1, 2, 3]
        assert [r.accuracy is not None for r in rows] == [False, True, False, True]
        assert model.samples_seen == 12
        assert all(np.isfinite([r.reward, r.mean_wrench_norm, r.boundary_est]).all() for r in rows)

    def test_deterministic(self, tmp_path):
        cfg = parse_config_text(TINY)
        for d in ("a", "b"):
            run_experiment(cfg, tmp_path / d)
        for name in ("metrics.csv", "model.ckpt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_baseline_never_updates(self, tmp_path):
        cfg = parse_config_text(TINY + "experiment.adaptive = false\n")
        rows, model = run_experiment(cfg, tmp_path)["default"]
        loaded, _ = load_checkpoint(tmp_path / "model.ckpt")
        assert not loaded.weights.any() and loaded.samples_seen == 0
        assert any(r.mean_wrench_norm > 0 for r in rows)

    def test_multi_profile_outputs(self, tmp_path):
        cfg = parse_config_text(TINY + "human.weak.capability = 0.3\nhuman.strong.capability = 0.7\n")
        run_experiment(cfg, tmp_path)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["metrics_strong.csv", "metrics_weak.csv", "model_strong.ckpt", "model_weak.ckpt"]

    def test_episode_refresh(self):
        cfg = parse_config_text(TINY + "learner.refresh = episode\n")
        rows, model = run_replicate(cfg, cfg.profile)
        assert len(rows) == 4 and model.samples_seen == 12


class TestEvalRecovery:
    def test_analytic_hyperplane(self, recovery_cfg):
        # true lower edge at robot = friction - c* = 0.425
        model = ConstraintModel(np.array([0.0, 1.0, 0.0, -0.425]), samples_seen=1)
        accuracy, error = eval_recovery(model, recovery_cfg.profile, recovery_cfg)
        assert accuracy == 1.0
        assert error == pytest.approx(0.0, abs=1e-12)

    def test_untrained_counts_inside(self, recovery_cfg):
        n = 10001
        accuracy, _ = eval_recovery(ConstraintModel.zeros(), recovery_cfg.profile, recovery_cfg, n)
        robot = np.linspace(0.0, 1.0, n)
        inside = np.count_nonzero(0.825 - robot <= 0.4 + 1e-9)
        assert accuracy == pytest.approx(inside / n, abs=1e-12)

    def test_capability_scales_boundary(self, recovery_cfg):
        model = ConstraintModel(np.array([0.0, 1.0, 0.0, -0.525]), samples_seen=1)
        _, error = eval_recovery(model, HumanProfile(capability=(0.3,)), recovery_cfg)
        assert error == pytest.approx(0.0, abs=1e-12)


class TestCli:
    def write_cfg(self, tmp_path, text=TINY):
        path = tmp_path / "exp.cfg"
        path.write_text(text)
        return path

    def test_simulate_and_eval(self, tmp_path, capsys):
        cfg = self.write_cfg(tmp_path)
        assert main(["simulate", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / "o")]) == 0
        assert main(["eval", "--checkpoint", str(tmp_path / "o" / "model.ckpt"), "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "accuracy=" in out and "boundary_error=" in out

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = self.write_cfg(tmp_path, "env.bogus = 1\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "env.bogus" in capsys.readouterr().err

    def test_missing_config_exit(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 2

    def test_io_error_exit(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["simulate", "--config", str(cfg), "--out", str(blocker / "sub")]) == 3

    def test_parse_error_exit(self, tmp_path):
        log = tmp_path / "ft.csv"
        log.write_text("a,0,1,2\n")
        assert main(["analyze-ft", "--log", str(log), "--runs", "1", "--out", str(tmp_path / "s.csv")]) == 3

    def test_missing_checkpoint_exit(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        assert main(["eval", "--checkpoint", str(tmp_path / "nope"), "--config", str(cfg)]) == 3

    def test_analyze_ft_writes(self, tmp_path):
        log = tmp_path / "ft.csv"
        write_ft_log(log, {i: np.full((3, 6), float(i)) for i in range(3)})
        out = tmp_path / "s.csv"
        assert main(["analyze-ft", "--log", str(log), "--runs", "3", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert list(rows[0]) == ["channel", "t", "mean", "std"]
        assert len(rows) == 18 and float(rows[0]["mean"]) == 1.0

    def test_seed_must_be_u64(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        with pytest.raises(SystemExit):
            main(["simulate", "--config", str(cfg), "--seed", "-1", "--out", str(tmp_path)])
