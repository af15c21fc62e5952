"""Tests for services/config.py."""
from pathlib import Path

import pytest

from services.config import (
    DEFAULT_OUTPUT_DIR,
    ConfigError,
    RuntimeConfig,
    build_experiment_config,
    load_config_file,
)


class TestRuntimeConfig:
    """Tests for RuntimeConfig.from_env."""

    def test_defaults(self, clean_env):
        """Without QCNN_* variables the built-in defaults apply."""
        config = RuntimeConfig.from_env()
        assert config.output_dir == DEFAULT_OUTPUT_DIR
        assert config.workers == 1
        assert config.log_level == "WARNING"
        assert config.data_dir_from_env is False

    def test_reads_environment(self, clean_env, tmp_path):
        """QCNN_* variables override the defaults."""
        clean_env.setenv("QCNN_DATA_DIR", str(tmp_path / "cifar"))
        clean_env.setenv("QCNN_WORKERS", "4")
        clean_env.setenv("QCNN_LOG_LEVEL", "debug")
        config = RuntimeConfig.from_env()
        assert config.data_dir == tmp_path / "cifar"
        assert config.data_dir_from_env is True
        assert config.workers == 4
        assert config.log_level == "DEBUG"

    def test_bad_workers(self, clean_env):
        """A non-integer worker count is a ConfigError."""
        clean_env.setenv("QCNN_WORKERS", "many")
        with pytest.raises(ConfigError):
            RuntimeConfig.from_env()


class TestConfigFile:
    """Tests for key = value experiment files."""

    def test_reads_values(self, tmp_path):
        """Comments are ignored and values come back as strings."""
        path = tmp_path / "exp.env"
        path.write_text("# LAB luminance\ncolor_space = LAB\nchannel = L\nepochs = 3\n")
        assert load_config_file(path) == {"color_space": "LAB", "channel": "L", "epochs": "3"}

    def test_unknown_key(self, tmp_path):
        """Unknown fields are rejected."""
        path = tmp_path / "exp.env"
        path.write_text("colour_space = LAB\n")
        with pytest.raises(ConfigError, match="colour_space"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        """A missing file is a ConfigError."""
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "nope.env")


class TestPrecedence:
    """Tests for build_experiment_config."""

    def test_file_then_flags(self, clean_env):
        """CLI overrides beat file values, which beat defaults."""
        config = build_experiment_config(
            {"epochs": "3", "seed": "4", "template": "u1crx"},
            {"seed": 9, "channel": None},
            RuntimeConfig.from_env(),
        )
        assert config.epochs == 3
        assert config.seed == 9
        assert config.template == "U1_CRX"
        assert config.channel == "0"

    def test_env_data_dir_beats_file(self, clean_env, tmp_path):
        """QCNN_DATA_DIR overrides the file but not the flag."""
        clean_env.setenv("QCNN_DATA_DIR", str(tmp_path / "env"))
        runtime = RuntimeConfig.from_env()
        from_file = build_experiment_config({"data_dir": "file"}, {}, runtime)
        assert from_file.data_dir == tmp_path / "env"
        from_flag = build_experiment_config({"data_dir": "file"}, {"data_dir": Path("flag")}, runtime)
        assert from_flag.data_dir == Path("flag")

    def test_file_data_dir_beats_default(self, clean_env):
        """Without QCNN_DATA_DIR the file's data_dir is used."""
        config = build_experiment_config({"data_dir": "file"}, {}, RuntimeConfig.from_env())
        assert config.data_dir == Path("file")

    def test_invalid_value(self):
        """Validation errors become ConfigError."""
        with pytest.raises(ConfigError):
            build_experiment_config({"stride": "3"})
