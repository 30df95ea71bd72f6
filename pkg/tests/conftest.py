import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = DATA_DIR / "golden"

settings.register_profile(
    "ci", derandomize=True, max_examples=50, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def fixture_prices(data_dir) -> Path:
    return data_dir / "fixture_prices.csv"


@pytest.fixture(scope="session")
def fixture_universe(data_dir) -> Path:
    return data_dir / "fixture_universe.csv"
