import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("rfcnn", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("rfcnn")

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
