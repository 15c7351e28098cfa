import math

import numpy as np
import pytest

from kpme.alphaskp import EwaldConfig, SkpTerm, SkpDecomposition
from kpme.geometry import Box3
from kpme.oracle import (
    OracleGuardError,
    dense_rebuild_skp,
    dense_reciprocal_apply,
    dense_reciprocal_matrix,
)


def test_zero_charges(rng):
    X = rng.random((5, 3))
    assert not np.any(dense_reciprocal_apply(X, X, np.zeros(5), EwaldConfig(2.0, 2)))


def test_m0_is_empty(rng):
    X = rng.random((4, 3))
    assert not np.any(dense_reciprocal_apply(X, X, np.ones(4), EwaldConfig(2.0, 0)))


def test_self_potential_m1():
    got = dense_reciprocal_apply([[0.1, 0.2, 0.3]], [[0.1, 0.2, 0.3]], [1.0], EwaldConfig(math.pi, 1))[0]
    # 6 face, 12 edge and 8 corner modes
    expect = 6 * math.exp(-1) + 12 * math.exp(-2) / 2 + 8 * math.exp(-3) / 3
    assert got == pytest.approx(expect, rel=1e-14)


def test_translation_invariance(rng):
    cfg = EwaldConfig(2.5, 3)
    X, Y, q = rng.random((6, 3)), rng.random((7, 3)), rng.standard_normal(7)
    s = rng.random(3)
    a = dense_reciprocal_apply(X, Y, q, cfg)
    b = dense_reciprocal_apply(X + s, Y + s, q, cfg)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_mode_sign_symmetry(rng):
    # summing over m and over -m gives conjugate kernels; their mean is the real result
    cfg = EwaldConfig(2.0, 2)
    X, Y = rng.random((4, 3)), rng.random((3, 3))
    d = X[:, None, :] - Y[None, :, :]
    pos = np.zeros(d.shape[:2], dtype=complex)
    neg = np.zeros_like(pos)
    for m in np.ndindex(5, 5, 5):
        m = np.array(m) - 2
        r = m @ m
        if r:
            a = math.exp(-(math.pi**2) * r / 4.0) / r
            pos += a * np.exp(2j * math.pi * d @ m)
            neg += a * np.exp(-2j * math.pi * d @ m)
    assert np.allclose(0.5 * (pos + neg).real, dense_reciprocal_matrix(X, Y, cfg), atol=1e-13)


def test_box_phase_frame(rng):
    cfg = EwaldConfig(2.0, 2)
    box = Box3((1.0, 2.0, 3.0), 0.5, period=2.0)
    X = box.center + rng.uniform(-0.5, 0.5, (5, 3))
    q = rng.standard_normal(5)
    a = dense_reciprocal_apply(X, X, q, cfg, box)
    b = dense_reciprocal_apply(box.normalize(X), box.normalize(X), q, cfg)
    assert np.array_equal(a, b)


def test_guard():
    X = np.zeros((1000, 3))
    with pytest.raises(OracleGuardError):
        dense_reciprocal_apply(X, X, np.zeros(1000), EwaldConfig(1.0, 5))


def test_rebuild_definition():
    a = np.array([1.0, 2.0, 1.0])
    dec = SkpDecomposition([SkpTerm(2.0, (a, a, a))], correction=2.0, kind="svd", M=1)
    t = dense_rebuild_skp(dec)
    assert t[1, 1, 1] == 2.0 * 8 - 2.0
    assert t[0, 2, 1] == 2.0 * 1 * 1 * 2
