import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from naive_mv import BlackScholesParams, case1_target, case2_target


@pytest.fixture(scope="session")
def params():
    return BlackScholesParams(r=0.02, b=0.08, sigma=0.2, horizon=1.0)


@pytest.fixture(scope="session")
def model(params):
    return params.to_market_model()


@pytest.fixture(scope="session")
def case1(params):
    return case1_target(params, 1.0)


@pytest.fixture(scope="session")
def case2(params):
    return case2_target(params, 0.05)
