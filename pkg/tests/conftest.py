import json
import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
REPO_DIR = TESTS_DIR.parent
sys.path.insert(0, str(TESTS_DIR))

import denguecast as dc  # noqa: E402


@pytest.fixture(scope="session")
def oracles() -> dict:
    return json.loads((TESTS_DIR / "oracle_values.json").read_text())


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return REPO_DIR / "data"


@pytest.fixture(scope="session")
def scenario_path() -> Path:
    return REPO_DIR / "scenarios" / "single_strain_benchmark.cfg"


@pytest.fixture
def outbreak1() -> dc.IncidenceSeries:
    from _fixtures import outbreak1_counts

    start, counts = outbreak1_counts()
    return dc.IncidenceSeries(start, tuple(counts))


#: observed cumulative counts for outbreak-1 target weeks 16..21
OUTBREAK1_OBSERVED = {16: 1, 17: 1, 18: 6, 19: 6, 20: 10, 21: 10}


@pytest.fixture(scope="session")
def outbreak1_observed() -> dict:
    return dict(OUTBREAK1_OBSERVED)
