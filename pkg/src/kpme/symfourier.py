"""Real cosine/sine factors that replace complex Fourier matrices.

Summing ``exp(2 i pi <g m, x - y>)`` over the sign flips ``g`` of ``m`` gives
``prod_j 2^[m_j > 0] cos(2 pi m_j (x_j - y_j))``, which splits per axis as
``W_m(x)^T W_m(y)`` with ``W_m(y) = sqrt(2^[m > 0]) (cos 2 pi m y, sin 2 pi m y)``.
Only modes ``0..M`` are then needed, and all factors are real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .alphaskp import SkpTerm

__all__ = [
    "SignedProfileError",
    "VFactor",
    "axis_operand",
    "build_v",
    "build_w",
    "even_half",
    "orbit_sum_check",
    "w_stack",
]

class SignedProfileError(ValueError):
    """A profile is negative somewhere and sign routing was disabled."""


def build_w(m: int, points) -> np.ndarray:
    """``2 x n`` block ``sqrt(2^[m>0]) [cos(2 pi m y); sin(2 pi m y)]``."""
    if m < 0:
        raise ValueError("mode must be non-negative")
    y = np.asarray(points, dtype=float).ravel()
    scale = math.sqrt(2.0) if m > 0 else 1.0
    arg = 2.0 * math.pi * m * y
    return scale * np.vstack([np.cos(arg), np.sin(arg)])


def w_stack(M: int, points) -> np.ndarray:
    """``build_w`` for ``m = 0..M`` stacked into a ``2(M+1) x n`` matrix."""
    return np.vstack([build_w(m, points) for m in range(M + 1)])


def orbit_sum_check(m, x, y) -> tuple[float, float]:
    """Direct sign-flip orbit sum and the cosine product for ``m >= 0``.

    The orbit sum runs over the distinct images of ``m`` under coordinate
    sign flips, so flips that fix ``m`` are counted once.
    """
    m = np.asarray(m, dtype=int)
    if np.any(m < 0):
        raise ValueError("orbit representative must be non-negative")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    orbit = {tuple(int(s * v) for s, v in zip(signs, m)) for signs in product((1, -1), repeat=3)}
    direct = sum(np.exp(2j * math.pi * np.dot(g, d)) for g in sorted(orbit))
    cos_prod = 1.0
    for mj, dj in zip(m, d):
        cos_prod *= (2.0 if mj else 1.0) * math.cos(2.0 * math.pi * mj * dj)
    return float(direct.real), cos_prod


@dataclass(frozen=True)
class VFactor:
    """``2(M+1) x L`` factor plus the per-row signs of the weighted profile.

    The axis operand between two node sets is ``V_left^T diag(signs) V_right``.
    """

    matrix: np.ndarray
    signs: np.ndarray

    @property
    def left(self) -> np.ndarray:
        """``U = (diag(signs) V)^T``, the factor applied on the target side."""
        return (self.signs[:, None] * self.matrix).T


def even_half(profile, M: int) -> np.ndarray:
    """Even part of a profile over ``[-M, M]``, restricted to ``m = 0..M``.

    Mode weights are even in every coordinate, so any odd component of an
    SVD profile is rounding noise (it only shows up in negligible terms).
    """
    p = np.asarray(profile, dtype=float)
    if p.shape != (2 * M + 1,):
        raise ValueError(f"profile of shape {p.shape} does not span [-{M}, {M}]")
    return 0.5 * (p[M:] + p[M::-1])


def build_v(term: SkpTerm, axis: int, nodes, M: int, allow_signed: bool = True) -> VFactor:
    """Rows ``|w|^(1/6) sqrt(|a(m)|) W_m`` for ``m = 0..M`` on the given 1-D nodes.

    The weight is split over the ``U`` and ``V`` sides of all three axes, so
    each axis operand ``U V`` carries ``cbrt(w)``.
    Negative profile entries (and a negative weight, routed to axis 0) are
    carried in ``signs`` when ``allow_signed`` is true.
    """
    half = even_half(term.profiles[axis], M)
    sign = np.where(half < 0, -1.0, 1.0)
    w = term.weight
    if axis == 0 and w < 0:
        sign = -sign
    if not allow_signed and (np.any(sign < 0) or w < 0):
        raise SignedProfileError("negative weight or profile entry with sign routing disabled")
    scale = abs(w) ** (1.0 / 6.0) * np.sqrt(np.abs(half))
    rows = np.repeat(scale, 2)[:, None] * w_stack(M, nodes)
    return VFactor(matrix=rows, signs=np.repeat(sign, 2))


def axis_operand(left: VFactor, right: VFactor) -> np.ndarray:
    """Dense ``L x L`` axis operand ``V_left^T diag(signs) V_right``."""
    return left.left @ right.matrix
