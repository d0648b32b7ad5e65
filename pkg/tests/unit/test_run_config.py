"""
Tests for run configuration parsing, presets and hashing.
"""

import pytest

from config.experiment_config import DEFAULT_RUN_CONFIG, get_available_experiments, get_experiment_config
from config.settings import EXPERIMENTS_DIR
from src.utils.errors import ConfigError
from src.utils.run_config import (
    build_run_config,
    canonical_text,
    config_hash,
    load_run_config,
    parse_run_config,
    parse_value,
    to_train_config,
)


class TestParsing:
    def test_typed_values(self):
        config = parse_run_config(
            "# comment\nvariant = usnet\nepochs = 3\nlr = 0.1  # trailing\n"
            "widths = 1.0, 0.5\naugment = yes\n"
        )
        assert config == {"variant": "usnet", "epochs": 3, "lr": 0.1, "widths": [1.0, 0.5], "augment": True}

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="colour"):
            parse_run_config("colour = blue\n")

    def test_bad_int(self):
        with pytest.raises(ConfigError):
            parse_value("epochs", "many")

    def test_bad_bool(self):
        with pytest.raises(ConfigError):
            parse_value("augment", "maybe")

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_run_config("epochs 3\n")

    def test_non_string_values(self):
        assert parse_value("widths", [1, 0.5]) == [1.0, 0.5]
        assert parse_value("lr", 0.5) == 0.5


class TestPrecedence:
    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = 5\nlr = 0.2\n")
        config = build_run_config(path, {"lr": "0.3", "seed": None})
        assert config["epochs"] == 5
        assert config["lr"] == 0.3
        assert config["seed"] == DEFAULT_RUN_CONFIG["seed"]

    def test_preset_base(self):
        config = build_run_config(base=get_experiment_config("cifar10_awn_rs"))
        assert config["dataset"] == "cifar10" and config["weight_decay"] == 1e-3

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            get_experiment_config("imagenet")

    @pytest.mark.parametrize("name", sorted(p.stem for p in EXPERIMENTS_DIR.glob("*.cfg")))
    def test_shipped_configs_parse(self, name):
        config = build_run_config(EXPERIMENTS_DIR / f"{name}.cfg")
        to_train_config(config)

    def test_every_preset_builds_train_config(self):
        for name in get_available_experiments():
            train_config = to_train_config(get_experiment_config(name))
            assert train_config.widths[0] == 1.0


    def test_lenet_runs_start_at_lr_001(self):
        for name in get_available_experiments():
            assert get_experiment_config(name)["lr"] == 0.01, name
        for path in EXPERIMENTS_DIR.glob("*.cfg"):
            assert build_run_config(path)["lr"] == 0.01, path.name


class TestHash:
    def test_stable_and_short(self):
        a = config_hash(dict(DEFAULT_RUN_CONFIG))
        assert a == config_hash(dict(DEFAULT_RUN_CONFIG))
        assert len(a) == 16

    def test_paths_and_names_ignored(self):
        other = {**DEFAULT_RUN_CONFIG, "output_dir": "/elsewhere", "name": "x", "data_dir": "/d"}
        assert config_hash(other) == config_hash(dict(DEFAULT_RUN_CONFIG))

    def test_settings_change_hash(self):
        assert config_hash({**DEFAULT_RUN_CONFIG, "seed": 2}) != config_hash(dict(DEFAULT_RUN_CONFIG))

    def test_canonical_text_sorted(self):
        text = canonical_text({"b": 1, "a": [1, 0.5], "c": 0.1})
        assert text == "a=1.0,0.5\nb=1\nc=0.1\n"

    def test_key_order_irrelevant(self, tmp_path):
        first = tmp_path / "a.cfg"
        second = tmp_path / "b.cfg"
        first.write_text("epochs = 2\nlr = 0.5\n")
        second.write_text("lr = 0.5\nepochs = 2\n")
        assert config_hash(build_run_config(first)) == config_hash(build_run_config(second))
        assert load_run_config(first) == load_run_config(second)
