"""Tests for condyr.config module."""

from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from condyr.config import apply_overrides, load_config, load_config_file, parse_env
from condyr.exceptions import ConfigError
from condyr.models import Config


@pytest.fixture
def config_file(tmp_path):
    """Create a temporary condyr.yaml file."""
    data = {
        "store": "data/archive.condyr",
        "metadata_graph": "ex:meta",
        "inline_ids": True,
        "format": "json",
        "repetitions": 20,
        "warmup": 5,
    }
    path = tmp_path / "custom.yaml"
    path.write_text(yaml.dump(data))
    return path


class TestLoadConfigFile:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Config file missing"):
            load_config_file(tmp_path / "missing.yaml")

    def test_empty_file_is_empty_mapping(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config_file(path) == {}

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError, match="must contain a YAML mapping"):
            load_config_file(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("store: [unclosed\n")
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_config_file(path)

    def test_unknown_keys(self, tmp_path):
        path = tmp_path / "unknown.yaml"
        path.write_text("store: x\nmemory: 4G\n")
        with pytest.raises(ConfigError, match="Unknown config keys .*memory"):
            load_config_file(path)


class TestLoadConfig:
    def test_defaults_without_file(self, clean_env):
        assert load_config() == Config()

    def test_explicit_file(self, clean_env, config_file):
        cfg = load_config(config_file)
        assert cfg.store_path == Path("data/archive.condyr")
        assert cfg.metadata_graph == "ex:meta"
        assert cfg.inline_ids is True
        assert cfg.output_format == "json"
        assert (cfg.repetitions, cfg.warmup) == (20, 5)

    def test_config_path_from_env(self, clean_env, mock_env, config_file):
        mock_env(CONDYR_CONFIG=str(config_file))
        assert load_config().metadata_graph == "ex:meta"

    def test_default_file_in_working_directory(self, clean_env, tmp_path):
        (tmp_path / "condyr.yaml").write_text("format: json\n")
        assert load_config().output_format == "json"

    def test_env_overrides_file(self, clean_env, mock_env, config_file):
        mock_env(CONDYR_FORMAT="tsv", CONDYR_REPS="40", CONDYR_INLINE_IDS="no")
        cfg = load_config(config_file)
        assert cfg.output_format == "tsv"
        assert cfg.repetitions == 40
        assert cfg.inline_ids is False
        assert cfg.warmup == 5


class TestParseEnv:
    def test_all_variables(self, clean_env, mock_env):
        mock_env(
            CONDYR_STORE="/tmp/s.condyr",
            CONDYR_METADATA_GRAPH="ex:md",
            CONDYR_INLINE_IDS="1",
            CONDYR_FORMAT="JSON",
            CONDYR_SORT="yes",
            CONDYR_REPS="3",
            CONDYR_WARMUP="0",
            CONDYR_ALLOW_EMPTY="true",
            CONDYR_SELFTEST_ROUNDS="7",
            CONDYR_PG_URL="postgresql://localhost/condyr",
        )
        cfg = parse_env(Config())
        assert cfg.store_path == Path("/tmp/s.condyr")
        assert cfg.metadata_graph == "ex:md"
        assert cfg.inline_ids is True
        assert cfg.output_format == "json"
        assert cfg.stable_sort is True
        assert (cfg.repetitions, cfg.warmup, cfg.selftest_rounds) == (3, 0, 7)
        assert cfg.allow_empty_snapshot is True
        assert cfg.pg_url == "postgresql://localhost/condyr"

    def test_invalid_format(self, clean_env, mock_env):
        mock_env(CONDYR_FORMAT="xml")
        with pytest.raises(ConfigError, match="Invalid format 'xml'"):
            parse_env(Config())

    def test_invalid_reps(self, clean_env, mock_env):
        mock_env(CONDYR_REPS="0")
        with pytest.raises(ConfigError, match="CONDYR_REPS must be >= 1"):
            parse_env(Config())


class TestApplyOverrides:
    def test_none_is_ignored(self):
        cfg = Config(output_format="json")
        assert apply_overrides(cfg, output_format=None, store_path=None) == cfg

    def test_values_are_coerced(self):
        cfg = apply_overrides(Config(), store_path="x.condyr", stable_sort="on", warmup="2")
        assert cfg.store_path == Path("x.condyr")
        assert cfg.stable_sort is True
        assert cfg.warmup == 2

    def test_original_untouched(self):
        cfg = Config()
        apply_overrides(cfg, repetitions=5)
        assert cfg.repetitions != 5
