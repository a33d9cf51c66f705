import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bafflesim.ml_core import Arch, LabeledDataset, init_model  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(n_per_class=30, num_classes=3, dim=4, spread=0.3, seed=0, radius=3.0):
    r = np.random.default_rng(seed)
    means = r.standard_normal((num_classes, dim))
    means *= radius / np.linalg.norm(means, axis=1, keepdims=True)
    y = np.repeat(np.arange(num_classes), n_per_class)
    X = means[y] + spread * r.standard_normal((y.size, dim))
    return LabeledDataset(X, y, num_classes)


def random_model(dim=4, classes=3, hidden=(), seed=0):
    return init_model(Arch(dim, classes, hidden), seed)
