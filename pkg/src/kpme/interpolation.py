"""Equispaced tensor Lagrange interpolation of particles onto per-cell grids.

Each cell carries an ``L x L x L`` product grid whose 1-D nodes are the
equispaced reference points of ``[-1, 1]`` (endpoints included) mapped onto
the cell interval.  Interpolation spreads charges onto the grid; anterpolation
is its transpose and evaluates grid data at the particles.

The basis is the plain product form, not the barycentric one; beyond
``L ~ 10`` rounding grows quickly on equispaced nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import CellGrid, assign_particles

__all__ = [
    "InterpGrid1D",
    "InterpOperator",
    "anterpolate",
    "build_interp_operator",
    "cell_weights",
    "interp_error_probe",
    "interpolate",
    "lagrange_weights_1d",
    "tensor_weights",
]

MAX_ORDER = 16
WARN_ORDER = 10


@dataclass(frozen=True)
class InterpGrid1D:
    L: int

    def __post_init__(self):
        if not 2 <= self.L <= MAX_ORDER:
            raise ValueError(f"interpolation order must lie in [2, {MAX_ORDER}], got {self.L}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.L)

    def mapped(self, a: float, b: float) -> np.ndarray:
        """Nodes placed on the interval ``[a, b]``."""
        return 0.5 * (a + b) + 0.5 * (b - a) * self.nodes


def _to_reference(a: float, b: float, y, slack: float = 1e-12) -> np.ndarray:
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    y = np.asarray(y, dtype=float)
    t = (y - 0.5 * (b + a)) / (0.5 * (b - a))
    if np.any(np.abs(t) > 1 + slack):
        raise ValueError("point lies outside the interpolation interval")
    return t


def lagrange_weights_1d(grid: InterpGrid1D, interval, y) -> np.ndarray:
    """Basis values ``S(node_k, y)``; a scalar ``y`` gives shape ``(L,)``."""
    a, b = interval
    t = _to_reference(a, b, y)
    w = kernels.lagrange_weights(grid.nodes, np.atleast_1d(t).ravel())
    return w[0] if np.ndim(y) == 0 else w.reshape(np.shape(y) + (grid.L,))


def tensor_weights(grid: InterpGrid1D, bounds, y) -> np.ndarray:
    """Flattened ``L^3`` product weights of point ``y`` in the cuboid ``bounds`` (3 x 2)."""
    bounds = np.asarray(bounds, dtype=float)
    y = np.asarray(y, dtype=float)
    w = [lagrange_weights_1d(grid, bounds[a], y[a]) for a in range(3)]
    return np.einsum("a,b,c->abc", *w).ravel()


@dataclass
class CellWeights:
    """Particles of one cell with their per-axis weight matrices (n_c x L)."""

    index: tuple[int, int, int]
    particles: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    wz: np.ndarray

    def dense(self) -> np.ndarray:
        """``(L^3, n_c)`` block of the interpolation matrix for this cell."""
        return np.einsum("na,nb,nc->abcn", self.wx, self.wy, self.wz).reshape(-1, len(self.particles))


@dataclass
class InterpOperator:
    grid: CellGrid
    order: InterpGrid1D
    n_particles: int
    cells: list[CellWeights]

    @property
    def L(self) -> int:
        return self.order.L

    def cell_nodes(self, axis: int, i: int) -> np.ndarray:
        """Physical node coordinates of cell slab ``i`` along ``axis``."""
        return self.order.mapped(*self.grid.interval(axis, i))

    def dense(self) -> np.ndarray:
        """Full ``(ncells * L^3, N)`` block-diagonal-by-cell interpolation matrix."""
        L3 = self.L**3
        S = np.zeros((len(self.cells) * L3, self.n_particles))
        for c, cw in enumerate(self.cells):
            S[c * L3 : (c + 1) * L3, cw.particles] = cw.dense()
        return S


def cell_weights(grid: CellGrid, index, positions, L: int, particles=None) -> CellWeights:
    """Per-axis weights of ``positions`` (all inside cell ``index``) on its ``L``-point grid.

    ``particles`` records which global indices the rows belong to.
    """
    order = InterpGrid1D(L)
    positions = np.atleast_2d(np.asarray(positions, dtype=float)).reshape(-1, 3)
    w = []
    for axis in range(3):
        a, b = grid.interval(axis, index[axis])
        t = np.clip(_to_reference(a, b, positions[:, axis]), -1.0, 1.0)
        w.append(kernels.lagrange_weights(order.nodes, t))
    if particles is None:
        particles = np.arange(len(positions))
    return CellWeights(tuple(index), np.asarray(particles), *w)


def build_interp_operator(grid: CellGrid, positions, L: int) -> InterpOperator:
    order = InterpGrid1D(L)
    positions = np.atleast_2d(np.asarray(positions, dtype=float)).reshape(-1, 3)
    parts = assign_particles(grid, positions)
    cells = [cell_weights(grid, index, positions[idx], L, idx) for index, idx in zip(grid.cells(), parts)]
    return InterpOperator(grid, order, len(positions), cells)


def interpolate(op: InterpOperator, q) -> list[np.ndarray]:
    """Per-cell flattened grid vectors ``S q``."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != op.n_particles:
        raise ValueError(f"charge vector of size {q.size} does not match {op.n_particles} particles")
    return [kernels.spread(c.wx, c.wy, c.wz, q[c.particles]).ravel() for c in op.cells]


def anterpolate(op: InterpOperator, grids) -> np.ndarray:
    """Per-particle values ``S^T g`` from per-cell grid vectors."""
    grids = list(grids)
    if len(grids) != len(op.cells):
        raise ValueError(f"expected {len(op.cells)} grid vectors, got {len(grids)}")
    L = op.L
    out = np.zeros(op.n_particles)
    for c, g in zip(op.cells, grids):
        g = np.asarray(g, dtype=float)
        if g.size != L**3:
            raise ValueError(f"grid vector of size {g.size} does not match L^3 = {L**3}")
        out[c.particles] = kernels.gather(c.wx, c.wy, c.wz, g.reshape(L, L, L))
    return out


def interp_error_probe(M: int, r_c: float, L: int, n_samples: int = 2000, m=None, seed=0) -> float:
    """Sup error of interpolating ``exp(-2 i pi <m, y>)`` over a cell of half width ``r_c``.

    ``m`` defaults to the worst mode ``(M, M, M)``; the cell is centred at 0
    and the error is measured at ``n_samples`` uniform random points.
    """
    m = np.full(3, M, dtype=float) if m is None else np.asarray(m, dtype=float)
    order = InterpGrid1D(L)
    rng = np.random.default_rng(seed)
    y = rng.uniform(-r_c, r_c, size=(n_samples, 3))
    g = order.mapped(-r_c, r_c)
    # the target is separable, so the tensor interpolant is the product of 1-D ones
    approx = np.ones(n_samples, dtype=complex)
    for a in range(3):
        w = kernels.lagrange_weights(order.nodes, y[:, a] / r_c)
        approx *= w @ np.exp(-2j * math.pi * m[a] * g)
    exact = np.exp(-2j * math.pi * (y @ m))
    return float(np.max(np.abs(exact - approx)))
