import os

import numpy as np
import pytest

from anyonlab import _fft


@pytest.fixture(scope="session", autouse=True)
def fft_workers():
    _fft.set_workers(min(2, os.cpu_count() or 1))
    yield
    _fft.set_workers(1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
