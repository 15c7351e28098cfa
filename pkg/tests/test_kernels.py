import os
import subprocess
import sys

import numpy as np
import pytest

from kpme import kernels

needs_c = pytest.mark.skipif(kernels.c_impl is None, reason="compiled kernels not built")


def test_env_forces_fallback():
    env = dict(os.environ, KPME_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from kpme import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_c
def test_backend_selected():
    assert kernels.BACKEND == "cython"


@needs_c
@pytest.mark.parametrize("L", [2, 5, 12])
def test_lagrange_weights_agree(rng, L):
    nodes = np.linspace(-1, 1, L)
    t = rng.uniform(-1, 1, 200)
    np.testing.assert_allclose(
        kernels.c_impl.lagrange_weights(nodes, t), kernels.py_impl.lagrange_weights(nodes, t), rtol=1e-12, atol=1e-13
    )


@needs_c
def test_spread_gather_agree(rng):
    n, L = 300, 7
    w = [rng.standard_normal((n, L)) for _ in range(3)]
    q = rng.standard_normal(n)
    g = rng.standard_normal((L, L, L))
    np.testing.assert_allclose(kernels.c_impl.spread(*w, q), kernels.py_impl.spread(*w, q), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(kernels.c_impl.gather(*w, g), kernels.py_impl.gather(*w, g), rtol=1e-12, atol=1e-12)


@needs_c
def test_empty_inputs():
    w = np.zeros((0, 4))
    assert kernels.c_impl.spread(w, w, w, np.zeros(0)).shape == (4, 4, 4)
    assert kernels.c_impl.gather(w, w, w, np.zeros((4, 4, 4))).shape == (0,)
