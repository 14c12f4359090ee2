import os
import subprocess
import sys

import numpy as np
import pytest

from algoconcepts import _kernels, _pykernels
from algoconcepts.graphgen import make_rng

try:
    from algoconcepts import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")
    if _ckernels is not None:
        assert _kernels.BACKEND == "cython"


def test_pure_python_env_override():
    env = dict(os.environ, ALGOCONCEPTS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from algoconcepts import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _random_case(seed):
    rng = make_rng(seed)
    width = int(rng.integers(1, 8))
    X = rng.random((int(rng.integers(1, 60)), width)) < 0.5
    n_terms = int(rng.integers(0, 10))
    masks = rng.integers(0, 1 << width, n_terms).astype(np.uint64)
    values = (rng.integers(0, 1 << width, n_terms).astype(np.uint64)) & masks
    owners = rng.integers(0, 3, n_terms).astype(np.int64)
    return X, masks, values, owners


@needs_ext
@pytest.mark.parametrize("seed", range(40))
def test_match_labels_parity(seed):
    X, masks, values, owners = _random_case(seed)
    assert np.array_equal(_ckernels.pack_rows(X), _pykernels.pack_rows(X))
    rows = _pykernels.pack_rows(X)
    a = _ckernels.match_labels(rows, masks, values, owners, 3)
    b = _pykernels.match_labels(rows, masks, values, owners, 3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_ext
@pytest.mark.parametrize("seed", range(40))
def test_first_fitting_rule_parity(seed):
    rng = make_rng(seed, 1)
    width = 3
    n_samples = int(rng.integers(1, 12))
    sizes = rng.integers(1, 4, n_samples)
    rows = rng.integers(0, 1 << width, int(sizes.sum())).astype(np.uint64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    taus = rng.integers(0, 2, n_samples).astype(np.uint8)
    masks = rng.integers(1, 1 << width, 27).astype(np.uint64)
    values = rng.integers(0, 1 << width, 27).astype(np.uint64) & masks
    assert _ckernels.first_fitting_rule(rows, offsets, taus, masks, values) == \
        _pykernels.first_fitting_rule(rows, offsets, taus, masks, values)


def test_python_kernels_reference():
    rows = _pykernels.pack_rows(np.array([[1, 0], [0, 1], [1, 1]], bool))
    assert rows.tolist() == [1, 2, 3]
    first, count = _pykernels.match_labels(rows, np.array([1, 2], np.uint64), np.array([1, 2], np.uint64),
                                          np.array([0, 1]), 2)
    assert first.tolist() == [0, 1, 0] and count.tolist() == [1, 1, 2]
    # one sample continuing with {[0,1]}, one stopping with {[1,1]}; rule "bit0 = 0" fits
    k = _pykernels.first_fitting_rule(np.array([2, 3], np.uint64), np.array([0, 1, 2]), np.array([1, 0], np.uint8),
                                      np.array([2, 1], np.uint64), np.array([2, 0], np.uint64))
    assert k == 1
