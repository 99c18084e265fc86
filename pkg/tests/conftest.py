"""Shared test fixtures."""

from __future__ import annotations

import pytest

from condyr.sample import build_sample_store


@pytest.fixture
def mock_env(monkeypatch):
    """Helper to set environment variables for tests."""

    def _set(**kwargs):
        for key, value in kwargs.items():
            if value is None:
                monkeypatch.delenv(key, raising=False)
            else:
                monkeypatch.setenv(key, str(value))

    return _set


# All environment variables that load_config() reads; used to ensure a clean slate.
_CONFIG_ENV_VARS = [
    "CONDYR_CONFIG",
    "CONDYR_STORE",
    "CONDYR_METADATA_GRAPH",
    "CONDYR_INLINE_IDS",
    "CONDYR_FORMAT",
    "CONDYR_SORT",
    "CONDYR_REPS",
    "CONDYR_WARMUP",
    "CONDYR_ALLOW_EMPTY",
    "CONDYR_SELFTEST_ROUNDS",
    "CONDYR_PG_URL",
]


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """Clear every CONDYR_* variable and run from an empty directory (no ./condyr.yaml)."""
    for key in _CONFIG_ENV_VARS:
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def sample_store():
    return build_sample_store()


@pytest.fixture
def sample_snapshot(sample_store):
    return sample_store.snapshot()
