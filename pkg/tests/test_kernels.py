import os
import subprocess
import sys

import numpy as np
import pytest

from bafflesim import kernels
from bafflesim._jit import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _problem(hidden, n=37, d=5, c=4, seed=0):
    r = np.random.default_rng(seed)
    n_params = d * c + c if hidden == 0 else d * hidden + hidden + hidden * c + c
    params = r.normal(scale=0.3, size=n_params)
    X = r.normal(size=(n, d))
    y = r.integers(0, c, size=n).astype(np.int64)
    order = r.permutation(n).astype(np.int64)
    return params, X, y, order, c


@needs_numba
@pytest.mark.parametrize("hidden", [0, 6])
@pytest.mark.parametrize("batch", [1, 8, 100])
def test_sgd_epoch_jit_matches_numpy(hidden, batch):
    params, X, y, order, c = _problem(hidden)
    a, b = params.copy(), params.copy()
    kernels.sgd_epoch_numpy(a, X, y, order, batch, 0.2, hidden, c)
    kernels.sgd_epoch_jit(b, X, y, order, batch, 0.2, hidden, c)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("hidden", [0, 6])
def test_predict_jit_matches_numpy(hidden):
    params, X, _, _, c = _problem(hidden, n=300)
    np.testing.assert_array_equal(
        kernels.predict_labels_jit(params, X, hidden, c),
        kernels.predict_labels_numpy(params, X, hidden, c),
    )
    np.testing.assert_array_equal(
        kernels.predict_labels_auto(params, X[:10], hidden, c),
        kernels.predict_labels_numpy(params, X[:10], hidden, c),
    )


@needs_numba
def test_predict_ties_go_to_lowest_class_in_both():
    X = np.ones((3, 2))
    params = np.zeros(2 * 3 + 3)
    assert kernels.predict_labels_jit(params, X, 0, 3).tolist() == [0, 0, 0]
    assert kernels.predict_labels_numpy(params, X, 0, 3).tolist() == [0, 0, 0]


@needs_numba
def test_confusion_and_distances_match():
    r = np.random.default_rng(1)
    t = r.integers(0, 5, 200).astype(np.int64)
    p = r.integers(0, 5, 200).astype(np.int64)
    np.testing.assert_array_equal(kernels.confusion_counts_jit(t, p, 5),
                                  kernels.confusion_counts_numpy(t, p, 5))
    A, B = r.normal(size=(7, 3)), r.normal(size=(9, 3))
    np.testing.assert_allclose(kernels.pairwise_distances_jit(A, B),
                               kernels.pairwise_distances_numpy(A, B), rtol=1e-12)


def _backend_with(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("BAFFLESIM_DISABLE_JIT", None)
    else:
        env["BAFFLESIM_DISABLE_JIT"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from bafflesim import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    return out.stdout.strip()


def test_env_flag_selects_numpy_backend():
    assert _backend_with("1") == "numpy"


@needs_numba
def test_default_backend_is_numba():
    assert _backend_with(None) == "numba"
