from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

ECHO_SERVER = Path(__file__).parent / "support" / "echo_server.py"


@pytest.fixture(scope="session")
def bundled_dataset():
    from limestab import load_bundled

    return load_bundled()


@pytest.fixture(scope="session")
def bundled_stats(bundled_dataset):
    from limestab import infer_feature_stats

    return infer_feature_stats(bundled_dataset)


@pytest.fixture(scope="session")
def echo_server_argv():
    def argv(mode: str = "sum") -> list[str]:
        return [sys.executable, str(ECHO_SERVER), mode]

    return argv
