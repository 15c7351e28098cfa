"""Brute-force reference evaluators.

Everything here is deliberately slow and shares nothing with the fast path
except the mode weight formula, so it can serve as an independent check.
"""

from __future__ import annotations

import math

import numpy as np

from .alphaskp import EwaldConfig, SkpDecomposition
from .geometry import Box3

__all__ = [
    "OracleGuardError",
    "alpha_weight",
    "dense_grid_kernel",
    "dense_rebuild_skp",
    "dense_reciprocal_apply",
    "dense_reciprocal_matrix",
]

WORK_GUARD = 10**9
REBUILD_GUARD = 10**7
IMAG_TOL = 1e-12


class OracleGuardError(ValueError):
    """The requested dense evaluation exceeds the work guard."""


def alpha_weight(m2: float, xi: float) -> float:
    """``exp(-pi^2 r / xi^2) / r`` at ``r = |m|^2``, zero for the zero mode."""
    if m2 == 0:
        return 0.0
    return math.exp(-(math.pi**2) * m2 / xi**2) / m2


def _nonzero_modes(M: int) -> list[tuple[tuple[int, int, int], float]]:
    return [
        ((a, b, c), float(a * a + b * b + c * c))
        for a in range(-M, M + 1)
        for b in range(-M, M + 1)
        for c in range(-M, M + 1)
        if (a, b, c) != (0, 0, 0)
    ]


def _kernel(targets: np.ndarray, sources: np.ndarray, cfg: EwaldConfig) -> np.ndarray:
    """Complex mode sum accumulated one mode at a time in fixed order."""
    diff = targets[:, None, :] - sources[None, :, :]
    acc = np.zeros(diff.shape[:2], dtype=complex)
    for m, m2 in _nonzero_modes(cfg.M):
        acc += alpha_weight(m2, cfg.xi) * np.exp(2j * math.pi * (diff @ np.asarray(m, dtype=float)))
    residue = float(np.max(np.abs(acc.imag), initial=0.0))
    scale = max(float(np.max(np.abs(acc.real), initial=0.0)), 1.0)
    if residue > IMAG_TOL * scale:
        raise ArithmeticError(f"imaginary residue {residue:.3g} of the mode sum is not negligible")
    return acc.real


def _phase(points, box: Box3 | None) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 3)
    return p if box is None else box.normalize(p)


def _guard(n_t: int, n_s: int, M: int, limit: int = WORK_GUARD) -> None:
    work = n_t * n_s * (2 * M + 1) ** 3
    if work > limit:
        raise OracleGuardError(f"dense evaluation needs {work} mode terms, above the guard {limit}")


def dense_reciprocal_matrix(X, Y, cfg: EwaldConfig, box: Box3 | None = None) -> np.ndarray:
    """Dense ``H_M`` between targets ``X`` and sources ``Y``.

    With a ``box`` the points are first mapped to its phase frame.
    """
    x, y = _phase(X, box), _phase(Y, box)
    _guard(len(x), len(y), cfg.M)
    if cfg.M == 0 or len(x) == 0 or len(y) == 0:
        return np.zeros((len(x), len(y)))
    return _kernel(x, y, cfg)


def dense_reciprocal_apply(X, Y, q, cfg: EwaldConfig, box: Box3 | None = None, chunk: int = 256) -> np.ndarray:
    """Potentials ``H_M q`` at ``X`` due to charges ``q`` at ``Y``."""
    x, y = _phase(X, box), _phase(Y, box)
    q = np.asarray(q, dtype=float).ravel()
    if q.size != len(y):
        raise ValueError(f"{q.size} charges for {len(y)} sources")
    _guard(len(x), len(y), cfg.M)
    out = np.zeros(len(x))
    if cfg.M == 0 or len(y) == 0:
        return out
    for start in range(0, len(x), chunk):
        out[start : start + chunk] = _kernel(x[start : start + chunk], y, cfg) @ q
    return out


def dense_rebuild_skp(dec: SkpDecomposition, guard: int = REBUILD_GUARD) -> np.ndarray:
    """``sum_l w_l a_l (x) b_l (x) c_l - c delta_0`` as a full ``(2M+1)^3`` tensor."""
    n = 2 * dec.M + 1
    if len(dec.terms) * n**3 > guard:
        raise OracleGuardError(f"rebuilding {len(dec.terms)} terms of size {n}^3 exceeds the guard")
    out = np.zeros((n, n, n))
    for t in dec.terms:
        a, b, c = (np.asarray(p, dtype=float) for p in t.profiles)
        for i in range(n):
            out[i] += t.weight * a[i] * np.outer(b, c)
    out[dec.M, dec.M, dec.M] -= dec.correction
    return out


def dense_grid_kernel(cfg: EwaldConfig, nodes_i, nodes_j) -> np.ndarray:
    """``H_M`` between two point sets given in phase coordinates, e.g. two cell grids."""
    x = np.atleast_2d(np.asarray(nodes_i, dtype=float)).reshape(-1, 3)
    y = np.atleast_2d(np.asarray(nodes_j, dtype=float)).reshape(-1, 3)
    return dense_reciprocal_matrix(x, y, cfg)
