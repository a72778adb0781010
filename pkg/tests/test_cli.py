"""End-to-end tests of the command line."""

import json

import numpy as np
import pytest

from cli import cli_main
from core.config import TrainConfig, save_train_config
from core.io import read_pfm, read_png, save_dataset, save_gaussians_ply, write_pfm, write_png
from core.training import evaluate_cloud

pytestmark = pytest.mark.usefixtures("restore_logging")

EVAL_FIELDS = {"abs_rel", "rmse", "delta_1_25", "ssim", "psnr", "num_gaussians"}


def last_json(out: str):
    return json.loads(out.strip().splitlines()[-1])


@pytest.fixture
def scene_dir(tmp_path, tiny_scene_spec, capsys):
    spec_path = tmp_path / "scene.json"
    spec_path.write_text(tiny_scene_spec.model_dump_json())
    assert cli_main(["synth", "--spec", str(spec_path), "--out", str(tmp_path / "data")]) == 0
    summary = last_json(capsys.readouterr().out)
    assert summary["views"] == 6
    assert summary["test"] == ["view_003"]
    return tmp_path / "data"


@pytest.fixture
def trained_run(tmp_path, scene_dir, capsys):
    config = {
        "iterations": 12,
        "depth_start": 6,
        "refresh_interval": 3,
        "densify_from": 2,
        "densify_until": 10,
        "densify_interval": 4,
        "prior_mode": "stereo",
    }
    config_path = tmp_path / "train.json"
    config_path.write_text(json.dumps(config))
    out = tmp_path / "run"
    code = cli_main(["train", "--data", str(scene_dir), "--config", str(config_path), "--out", str(out)])
    assert code == 0
    summary = last_json(capsys.readouterr().out)
    assert summary["iterations"] == 12
    return out


class TestPipeline:
    """Test synth, train, eval, render and report chained together."""

    def test_train_writes_outputs(self, trained_run):
        assert (trained_run / "point_cloud.ply").exists()
        assert (trained_run / "run.jsonl").exists()
        config = json.loads((trained_run / "config.json").read_text())
        assert config["depth_start"] == 6
        assert config["prior_mode"] == "stereo"

    def test_eval(self, tmp_path, scene_dir, trained_run, capsys):
        metrics_path = tmp_path / "metrics.json"
        code = cli_main(["eval", "--ply", str(trained_run / "point_cloud.ply"), "--data", str(scene_dir),
                         "--out", str(metrics_path)])
        assert code == 0
        printed = last_json(capsys.readouterr().out)
        assert EVAL_FIELDS <= set(printed)
        assert printed["depth_normalized"] is True
        assert printed["median_scaled"] is False
        written = json.loads(metrics_path.read_text())
        assert EVAL_FIELDS <= set(written)
        assert written["split"] == "test"
        assert set(written["per_view"]) == {"view_003"}
        assert written["num_views"] == 1

    def test_render_zero_baseline_matches_left(self, tmp_path, scene_dir, trained_run):
        out = tmp_path / "renders"
        code = cli_main(["render", "--ply", str(trained_run / "point_cloud.ply"), "--data", str(scene_dir),
                         "--camera-id", "view_001", "--right-baseline", "0", "--out", str(out)])
        assert code == 0
        assert (out / "view_001.png").read_bytes() == (out / "view_001_right.png").read_bytes()
        left, left_valid = read_pfm(out / "view_001_depth.pfm")
        right, right_valid = read_pfm(out / "view_001_right_depth.pfm")
        assert left.shape == (18, 24)
        assert np.array_equal(left, right)
        assert np.array_equal(left_valid, right_valid)

    def test_report_summary(self, trained_run, capsys):
        capsys.readouterr()
        assert cli_main(["report", str(trained_run / "run.jsonl")]) == 0
        out = capsys.readouterr().out
        summary = json.loads(out[out.index("{"):])
        assert summary["iterations"] == 12
        assert summary["prior_stats"] is not None
        assert "events" not in summary["prior_stats"]


class TestRunConfig:
    """Test that render and eval composite like the training run."""

    @pytest.fixture
    def white_run(self, tmp_path, cloud_factory):
        run = tmp_path / "run"
        run.mkdir()
        save_gaussians_ply(cloud_factory([0.0, 0.0, 5.0]), run / "point_cloud.ply")
        save_train_config(TrainConfig(background=(1.0, 1.0, 1.0)), run / "config.json")
        return run

    def test_render_uses_run_background(self, tmp_path, scene_dir, white_run):
        out = tmp_path / "renders"
        code = cli_main(["render", "--ply", str(white_run / "point_cloud.ply"), "--data", str(scene_dir),
                         "--camera-id", "view_001", "--out", str(out)])
        assert code == 0
        assert np.mean(read_png(out / "view_001.png") == 1.0) > 0.9

    def test_background_option_overrides_run(self, tmp_path, scene_dir, white_run):
        out = tmp_path / "renders"
        code = cli_main(["render", "--ply", str(white_run / "point_cloud.ply"), "--data", str(scene_dir),
                         "--camera-id", "view_001", "--background", "0", "0", "0", "--out", str(out)])
        assert code == 0
        assert np.mean(read_png(out / "view_001.png") == 0.0) > 0.9

    def test_eval_uses_run_background(self, scene_dir, white_run, tiny_scene, cloud_factory, capsys):
        capsys.readouterr()
        assert cli_main(["eval", "--ply", str(white_run / "point_cloud.ply"), "--data", str(scene_dir)]) == 0
        printed = last_json(capsys.readouterr().out)
        cloud = cloud_factory([0.0, 0.0, 5.0])
        white = evaluate_cloud(cloud, tiny_scene.test_views, background=(1.0, 1.0, 1.0))
        black = evaluate_cloud(cloud, tiny_scene.test_views)
        assert printed["psnr"] == pytest.approx(white.psnr, abs=0.05)
        assert abs(white.psnr - black.psnr) > 0.5


class TestMatch:
    """Test the match subcommand on a shifted texture."""

    def test_recovers_shift(self, tmp_path, capsys):
        big = np.random.default_rng(7).uniform(0, 1, size=(30, 68, 3))
        write_png(tmp_path / "left.png", big[:, :64])
        write_png(tmp_path / "right.png", big[:, 4:68])
        out = tmp_path / "disparity.pfm"
        code = cli_main(["match", "--left", str(tmp_path / "left.png"), "--right", str(tmp_path / "right.png"),
                         "--d-max", "12", "--out", str(out)])
        assert code == 0
        printed = last_json(capsys.readouterr().out)
        assert printed["d_max"] == 12
        assert printed["valid_fraction"] > 0.3
        disparity, valid = read_pfm(out)
        assert np.mean(np.abs(disparity[valid] - 4.0) <= 0.25) >= 0.99


class TestExitCodes:
    """Test usage and pipeline failures."""

    def test_missing_subcommand(self):
        assert cli_main([]) == 2

    def test_missing_required_option(self):
        assert cli_main(["train", "--out", "x"]) == 2

    def test_bad_choice(self):
        assert cli_main(["train", "--data", "d", "--out", "o", "--prior-mode", "lidar"]) == 2

    def test_help(self):
        assert cli_main(["--help"]) == 0

    def test_corrupt_depth_map(self, tmp_path, tiny_scene, cloud_factory, capsys):
        directory = save_dataset(tiny_scene, tmp_path / "data")
        write_pfm(directory / "depth" / "view_000.pfm", np.ones((3, 3)))
        ply = save_gaussians_ply(cloud_factory([0.0, 0.0, 5.0]), tmp_path / "cloud.ply")
        capsys.readouterr()
        code = cli_main(["--log-level", "ERROR", "eval", "--ply", str(ply), "--data", str(directory)])
        assert code == 1
        lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
        assert len(lines) == 1
        assert lines[0].startswith("error:")
        assert "view_000" in lines[0]
        assert "(3, 3)" in lines[0]
        assert "(18, 24)" in lines[0]

    def test_unknown_camera(self, tmp_path, tiny_scene, cloud_factory, capsys):
        directory = save_dataset(tiny_scene, tmp_path / "data")
        ply = save_gaussians_ply(cloud_factory([0.0, 0.0, 5.0]), tmp_path / "cloud.ply")
        code = cli_main(["--log-level", "ERROR", "render", "--ply", str(ply), "--data", str(directory),
                         "--camera-id", "nope", "--out", str(tmp_path / "r")])
        assert code == 1
        assert "nope" in capsys.readouterr().err

    def test_bad_config_file(self, tmp_path, scene_dir, capsys):
        config_path = tmp_path / "bad.json"
        config_path.write_text(json.dumps({"iterations": 5, "depth_start": 9}))
        code = cli_main(["--log-level", "ERROR", "train", "--data", str(scene_dir), "--config", str(config_path),
                         "--out", str(tmp_path / "run")])
        assert code == 1
        assert "depth_start" in capsys.readouterr().err
