import os

import numpy as np
import pytest

from pnnflow.utils.cache import checkpoint_cache


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long training runs, enabled with PNNFLOW_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("PNNFLOW_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set PNNFLOW_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """Fresh deterministic random stream"""
    return np.random.default_rng(1234)


@pytest.fixture
def clean_cache():
    """Clean checkpoint cache before and after each test"""
    checkpoint_cache.clear()
    yield
    checkpoint_cache.clear()
