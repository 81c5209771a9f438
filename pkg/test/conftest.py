import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scenario_dir():
    return ROOT / "scenarios"


@pytest.fixture
def sphere_points(rng):
    p = rng.standard_normal((20, 3))
    return p / np.linalg.norm(p, axis=1, keepdims=True)
