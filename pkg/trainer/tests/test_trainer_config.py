"""Hyperparameter defaults, overrides, and validation."""

import json

import pytest

from refneed_trainer import DEFAULT_BASE_MODEL, SCRATCH_BASE, TrainConfig


class TestDefaults:
    def test_deployed_settings(self):
        config = TrainConfig()
        assert config.base_model == DEFAULT_BASE_MODEL
        assert config.max_seq_len == 128
        assert config.learning_rate == 1e-5
        assert config.weight_decay == 0.01
        assert config.batch_size == 16
        assert config.epochs == 3

    def test_everything_overridable(self):
        config = TrainConfig(
            base_model=SCRATCH_BASE,
            max_seq_len=64,
            learning_rate=3e-4,
            weight_decay=0.0,
            batch_size=8,
            epochs=1,
            seed=11,
        )
        assert config.is_scratch
        assert config.max_seq_len == 64
        assert config.epochs == 1

    def test_default_base_is_not_scratch(self):
        assert not TrainConfig().is_scratch


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epochs": 0},
            {"batch_size": -1},
            {"max_seq_len": 3},
            {"learning_rate": 0.0},
            {"weight_decay": -0.1},
            {"base_model": ""},
            {"scratch_hidden_size": 30, "scratch_heads": 4},
            {"scratch_vocab_size": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            TrainConfig.from_dict({"epochs": 1, "warmup": 100})


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        config = TrainConfig(base_model=SCRATCH_BASE, epochs=5, seed=42)
        path = tmp_path / "config.json"
        config.to_json(path)
        assert TrainConfig.from_json(path) == config

    def test_written_file_is_plain_json(self, tmp_path):
        path = tmp_path / "config.json"
        TrainConfig().to_json(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["learning_rate"] == 1e-5
        assert payload["weight_decay"] == 0.01
