import os
import subprocess
import sys

import numpy as np
import pytest

from isq import _kernels
from isq._kernels import _pykernels


def test_backend_selection_env():
    code = "from isq import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, ISQ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_compiled_extension_built():
    # The package is meant to ship with its compiled core; a missing build is
    # tolerated at runtime but flagged here.
    assert _kernels.compiled is not None, "Cython extension not built"
    assert _kernels.BACKEND in ("cython", "python")


def test_env_marginal(backend, rng):
    n, m = 7, 11
    amp = np.ascontiguousarray(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    env = np.ascontiguousarray(rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
    brute = np.array([np.sum(np.abs(env @ amp[i]) ** 2) for i in range(n)])
    np.testing.assert_allclose(backend.env_marginal(amp, env), brute, rtol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_count_injective(backend, rng, n):
    maps = rng.integers(0, 6, size=(500, n), dtype=np.int64)
    expected = sum(len(set(row)) == n for row in maps.tolist())
    assert backend.count_injective(maps, 6) == expected


def test_polynomial_force(backend, rng):
    y = np.ascontiguousarray(rng.standard_normal((50, 3)))
    r2 = np.sum(y * y, axis=1, keepdims=True)
    np.testing.assert_allclose(backend.polynomial_force(y, 1.5, 0.2), -(1.5 + 0.2 * r2) * y, rtol=1e-14)


def test_verlet_matches_reference(backend, rng):
    S, D, steps = 40, 2, 30
    x0 = rng.standard_normal((S, D))
    jitter = np.ascontiguousarray(0.05 * rng.standard_normal((steps, S, D)))
    x, v = x0.copy(), np.zeros((S, D))
    f = backend.polynomial_force(np.ascontiguousarray(x + jitter[0]), 1.0, 0.3)
    means = backend.verlet_ensemble(x, v, f, jitter, 1e-2, 1.0, 0.3, 2.0)
    xr, vr = x0.copy(), np.zeros((S, D))
    fr = _pykernels.polynomial_force(xr + jitter[0], 1.0, 0.3)
    ref = _pykernels.verlet_ensemble(xr, vr, fr, jitter, 1e-2, 1.0, 0.3, 2.0)
    np.testing.assert_allclose(means, ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(x, xr, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(v, vr, rtol=1e-12, atol=1e-14)


@pytest.mark.skipif(_kernels.compiled is None, reason="no compiled backend")
def test_backends_agree_over_long_runs():
    rng = np.random.default_rng(0)
    jitter = np.ascontiguousarray(0.3 * rng.standard_normal((1000, 100, 1)))
    out = []
    for mod in (_kernels.compiled, _kernels.python):
        x, v = np.ones((100, 1)), np.zeros((100, 1))
        f = mod.polynomial_force(np.ascontiguousarray(x + jitter[0]), 1.0, 0.1)
        out.append(mod.verlet_ensemble(x, v, f, jitter, 1e-3, 1.0, 0.1, 1.0))
    assert np.abs(out[0] - out[1]).max() <= 1e-12
