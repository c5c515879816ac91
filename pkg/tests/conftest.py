import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from model import HdhnConfig, TierParams, default_config  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_PATH = os.path.join(ROOT, "configs", "default.toml")


@pytest.fixture
def base_config():
    return default_config(2)


@pytest.fixture
def default_path():
    return DEFAULT_PATH


@pytest.fixture
def single_tier():
    """One HD tier, alpha = 4, equal AP/user power."""
    return HdhnConfig(tiers=(TierParams(density=1e-3, ap_power=30.0, user_power=30.0),))


@pytest.fixture
def seed():
    return 2017
