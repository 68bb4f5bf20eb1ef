"""
Shared fixtures for the quadflow test suite.
"""

import os

import numpy as np
import pytest

from quadflow.imgio import Image
from tests.helpers import textured


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Keep developer .env files and QUADFLOW_* variables out of the tests"""
    for key in list(os.environ):
        if key.startswith("QUADFLOW_"):
            monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def texture() -> np.ndarray:
    return textured(64, 96, seed=7)


@pytest.fixture
def textured_image(texture) -> Image:
    return Image(texture)
