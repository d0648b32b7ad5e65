"""
End-to-end command runs on small synthetic IDX datasets.
"""

from pathlib import Path

import pandas as pd
import pytest

from src.cli import main
from src.experiments import commands
from src.training.trainer import bn_storage_report
from src.utils.checkpoint import file_digest, load_checkpoint
from src.utils.errors import VariantError
from src.utils.run_config import build_run_config

QUICK = {
    "dataset": "mnist",
    "base_channels": 4,
    "epochs": 1,
    "batch_size": 8,
    "max_batches": 2,
    "sweep_step": 0.25,
    "probe_size": 8,
    "calibrate_count": 4,
    "seed": 3,
}


@pytest.fixture
def quick_config(mnist_dir, tmp_path):
    def build(**overrides):
        values = {**QUICK, "data_dir": str(mnist_dir), "output_dir": str(tmp_path / "out"), **overrides}
        return build_run_config(overrides=values)

    return build


@pytest.fixture
def config_file(mnist_dir, tmp_path):
    path = tmp_path / "quick.cfg"
    lines = [f"{k} = {v}" for k, v in QUICK.items()] + [f"data_dir = {mnist_dir}"]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestTrain:
    def test_writes_checkpoint_and_log(self, quick_config, capsys):
        result = commands.cmd_train(quick_config(widths_mode="fixed"))
        assert result["checkpoint"].exists()
        log = pd.read_csv(result["checkpoint"].parent / "train_log.csv")
        assert list(log.columns) == ["epoch", "width", "loss", "lr"]
        assert len(log) == 4
        ckpt = load_checkpoint(result["checkpoint"])
        assert ckpt.metadata["dataset"] == "mnist"
        assert ckpt.sgd_state.velocity
        assert "sha256" in capsys.readouterr().out

    def test_same_seed_same_digest(self, quick_config, tmp_path):
        a = commands.cmd_train(quick_config(output_dir=str(tmp_path / "a")))
        b = commands.cmd_train(quick_config(output_dir=str(tmp_path / "b")))
        assert a["digest"] == b["digest"] == file_digest(b["checkpoint"])

    def test_random_sampling_labels(self, quick_config):
        history = commands.cmd_train(quick_config(widths_mode="random"))["history"]
        assert set(history.width) == {"1", "random", "0.25"}


class TestCheckpointCommands:
    def test_sweep_prints_auc(self, quick_config, capsys):
        config = quick_config()
        ckpt = commands.cmd_train(config)["checkpoint"]
        result = commands.cmd_sweep(config, ckpt)
        curve = pd.read_csv(result["curve_path"])
        assert list(curve.alpha) == [0.25, 0.5, 0.75, 1.0]
        assert 0.0 <= result["auc"] <= 1.0
        assert f"AUC={result['auc']:.6f}" in capsys.readouterr().out

    def test_eval(self, quick_config):
        config = quick_config()
        ckpt = commands.cmd_train(config)["checkpoint"]
        results = commands.cmd_eval(config, ckpt, [0.5, 1.0])
        assert set(results) == {0.5, 1.0}

    def test_calibrate_usnet(self, quick_config):
        config = quick_config(variant="usnet", widths_mode="random")
        ckpt = commands.cmd_train(config)["checkpoint"]
        result = commands.cmd_calibrate(config, ckpt, count=6)
        assert result["checkpoint"].name == "model_calibrated.ckpt"
        assert result["after"]["bn_slots"] == 6
        assert result["delta_bytes"] > 0
        calibrated = load_checkpoint(result["checkpoint"]).model
        assert calibrated.trained_widths == result["widths"]
        sweep = commands.cmd_sweep(config, result["checkpoint"], grid=[0.3, 0.6, 1.0])
        assert len(sweep["curve"].alphas) == 3

    def test_calibrate_rejects_awn(self, quick_config):
        config = quick_config()
        ckpt = commands.cmd_train(config)["checkpoint"]
        with pytest.raises(VariantError):
            commands.cmd_calibrate(config, ckpt)


class TestExperiments:
    def test_stats(self, quick_config):
        result = commands.cmd_stats(quick_config(widths_mode="fixed"))
        out = result["output_dir"]
        for name in ("accuracy_by_width.csv", "stats_summary.txt", "divergence_awn.csv",
                     "channel_stats_snet.csv"):
            assert (out / name).exists()

    def test_compare(self, quick_config):
        config = quick_config()
        result = commands.cmd_compare(config)
        out = Path(config["output_dir"])
        table = pd.read_csv(out / "comparison.csv")
        assert list(table.variant) == ["awn", "standard_shared_bn"]
        assert table.auc.round(6).tolist() == result["table"].auc.round(6).tolist()
        assert (out / "curve_awn.csv").exists() and (out / "curve_standard_shared_bn.csv").exists()


class TestCli:
    def test_train_then_sweep(self, config_file, tmp_path, capsys):
        out = tmp_path / "cli"
        assert main(["train", "--config", str(config_file), "--output-dir", str(out), "--variant", "awn"]) == 0
        assert main(["sweep", "--config", str(config_file), "--output-dir", str(out),
                     "--checkpoint", str(out / "model.ckpt"), "--grid", "0.25,0.5,1.0"]) == 0
        assert "AUC=" in capsys.readouterr().out
        assert (out / "curve.csv").exists()

    def test_eval_with_alphas(self, config_file, tmp_path, capsys):
        out = tmp_path / "cli"
        main(["train", "--config", str(config_file), "--output-dir", str(out)])
        assert main(["eval", "--config", str(config_file), "--checkpoint", str(out / "model.ckpt"),
                     "--alphas", "0.3,1.0"]) == 0
        assert "alpha=0.3" in capsys.readouterr().out

    @pytest.mark.parametrize("variant,slots", [("snet", 4), ("standard_shared_bn", 1)])
    def test_train_fixed_width_variants(self, config_file, tmp_path, variant, slots):
        out = tmp_path / variant
        assert main(["train", "--config", str(config_file), "--output-dir", str(out), "--variant", variant,
                     "--widths", "1.0,0.75,0.5,0.25"]) == 0
        model = load_checkpoint(out / "model.ckpt").model
        assert bn_storage_report(model)["bn_slots"] == slots
        log = pd.read_csv(out / "train_log.csv")
        assert sorted(set(log.width)) == [0.25, 0.5, 0.75, 1.0]

    @pytest.mark.parametrize("flag", ["--alphas", "--grid"])
    def test_malformed_width_list(self, config_file, tmp_path, capsys, flag):
        command = "eval" if flag == "--alphas" else "sweep"
        code = main([command, "--config", str(config_file), "--checkpoint", str(tmp_path / "m.ckpt"),
                     flag, "0.3,abc"])
        assert code == 1
        assert f"Error running {command}" in capsys.readouterr().out

    def test_missing_checkpoint_reports_error(self, config_file, tmp_path, capsys):
        code = main(["eval", "--config", str(config_file), "--checkpoint", str(tmp_path / "none.ckpt")])
        assert code == 1
        assert "Error running eval" in capsys.readouterr().out

    def test_bad_config_key(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("colour = blue\n")
        assert main(["train", "--config", str(path)]) == 1

    def test_unknown_subcommand_exits(self):
        with pytest.raises(SystemExit):
            main(["fly"])
