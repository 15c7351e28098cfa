"""Periodic box, cell-grid decomposition and particle-to-cell assignment.

Coordinates are handled in two frames.  Physical positions live inside a
cubic box of half edge ``radius`` centred at ``center``.  Fourier phases use
the normalised frame ``(x - center) / period`` so that a mode ``m`` contributes
``exp(2 i pi <m, x~ - y~>)``.  The default ``period`` of 1 makes the
interpolation ratio ``nu = pi * M * r_c`` exact in length units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

__all__ = [
    "Box3",
    "CellGrid",
    "ConvergenceCheck",
    "ParticleOutsideBox",
    "assign_particles",
    "build_cell_grid",
    "check_convergence_ratio",
    "cell_index_list",
    "read_point_cloud",
    "write_point_cloud",
    "uniform_point_cloud",
]


class ParticleOutsideBox(ValueError):
    """A particle lies outside the computational box."""

    def __init__(self, index: int, position):
        self.index = int(index)
        self.position = tuple(float(v) for v in position)
        super().__init__(f"particle {self.index} at {self.position} lies outside the box")


@dataclass(frozen=True)
class Box3:
    """Cubic box of half edge ``radius`` centred at ``center``."""

    center: tuple[float, float, float]
    radius: float
    period: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in np.ravel(self.center))
        if len(c) != 3:
            raise ValueError("box center must be a 3-vector")
        r = np.ravel(self.radius)
        if r.size != 1:
            # only cubic boxes are supported
            raise ValueError("only cubic boxes are supported; radius must be a scalar")
        r = float(r[0])
        if not r > 0:
            raise ValueError(f"box radius must be positive, got {r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)
        object.__setattr__(self, "period", float(self.period))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.radius

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.radius

    def normalize(self, positions) -> np.ndarray:
        """Map physical positions to the phase frame ``(x - c) / period``."""
        return (np.asarray(positions, dtype=float) - np.asarray(self.center)) / self.period

    def contains(self, positions) -> np.ndarray:
        p = np.atleast_2d(np.asarray(positions, dtype=float))
        return np.all(np.abs(p - np.asarray(self.center)) <= self.radius, axis=1)


@dataclass(frozen=True)
class CellGrid:
    """``K0 x K1 x K2`` tiling of a box into equal cuboids.

    Cubic grids use the same ``K`` on every axis, but rank grids
    such as ``(8, 1, 1)`` need a different count per axis, so ``shape`` holds
    one count per axis.
    """

    box: Box3
    shape: tuple[int, int, int]
    edges: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False, compare=False)

    @property
    def K(self) -> int:
        if len(set(self.shape)) != 1:
            raise ValueError(f"grid {self.shape} is not cubic")
        return self.shape[0]

    @property
    def ncells(self) -> int:
        return self.shape[0] * self.shape[1] * self.shape[2]

    def cell_radius(self, axis: int | None = None) -> float:
        """Half width of a cell; the largest over axes when ``axis`` is None."""
        if axis is None:
            return self.box.radius / min(self.shape)
        return self.box.radius / self.shape[axis]

    def interval(self, axis: int, i: int) -> tuple[float, float]:
        e = self.edges[axis]
        return float(e[i]), float(e[i + 1])

    def cell_bounds(self, index) -> np.ndarray:
        """``(3, 2)`` array of ``[lo, hi]`` per axis for cell ``index``."""
        return np.array([self.interval(a, index[a]) for a in range(3)])

    def flat_index(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def multi_index(self, flat: int) -> tuple[int, int, int]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def cells(self):
        """Multi-indices in lexicographic order, axis 0 slowest."""
        return product(*(range(k) for k in self.shape))


def build_cell_grid(box: Box3, K) -> CellGrid:
    """Split ``box`` into ``K`` cells per axis (``K`` may be an int or a triple)."""
    shape = (int(K),) * 3 if np.ndim(K) == 0 else tuple(int(k) for k in K)
    if len(shape) != 3 or min(shape) < 1:
        raise ValueError(f"cell counts must be three positive integers, got {K}")
    lo = box.lower
    edges = []
    for axis, k in enumerate(shape):
        i = np.arange(k + 1)
        e = lo[axis] + 2.0 * box.radius * i / k
        e[-1] = box.upper[axis]
        edges.append(e)
    return CellGrid(box=box, shape=shape, edges=tuple(edges))


def _axis_cell(edges: np.ndarray, x: np.ndarray) -> np.ndarray:
    # side="left" puts a point on an inner face in the lower cell
    k = len(edges) - 1
    idx = np.searchsorted(edges, x, side="left") - 1
    return np.clip(idx, 0, k - 1)


def cell_index_list(grid: CellGrid, positions) -> np.ndarray:
    """Per-particle ``(N, 3)`` cell multi-indices."""
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    if p.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    inside = grid.box.contains(p)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise ParticleOutsideBox(bad, p[bad])
    return np.stack([_axis_cell(grid.edges[a], p[:, a]) for a in range(3)], axis=1)


def assign_particles(grid: CellGrid, positions) -> list[np.ndarray]:
    """Index lists per cell, in the lexicographic cell order of ``grid.cells()``.

    Particles on a face shared by two cells go to the lower multi-index.
    """
    idx = cell_index_list(grid, positions)
    flat = np.ravel_multi_index(idx.T, grid.shape) if len(idx) else np.zeros(0, dtype=np.int64)
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=grid.ncells)
    return np.split(order, np.cumsum(counts)[:-1])


@dataclass(frozen=True)
class ConvergenceCheck:
    nu: float
    passed: bool


def check_convergence_ratio(grid: CellGrid, M: int, warn: bool = True) -> ConvergenceCheck:
    """Interpolation ratio ``nu = pi M r_c`` (r_c in phase units); passes iff ``nu < 1``."""
    if M < 1:
        raise ValueError("mode bound M must be >= 1")
    nu = math.pi * M * grid.cell_radius() / grid.box.period
    ok = nu < 1.0
    if warn and not ok:
        warnings.warn(
            f"interpolation ratio nu = {nu:.4g} >= 1; equispaced interpolation may not converge",
            RuntimeWarning,
            stacklevel=2,
        )
    return ConvergenceCheck(nu=nu, passed=ok)


# -- point-cloud text format: "N" then N lines "x y z q" --------------------------------


def read_point_cloud(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
        if len(header) != 1:
            raise ValueError(f"{path}: first line must hold the particle count")
        n = int(header[0])
        data = np.loadtxt(fh, ndmin=2) if n else np.zeros((0, 4))
    if data.shape != (n, 4):
        raise ValueError(f"{path}: expected {n} rows of 'x y z q', got shape {data.shape}")
    return data[:, :3].copy(), data[:, 3].copy()


def write_point_cloud(path, positions, charges) -> None:
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    charges = np.asarray(charges, dtype=float).ravel()
    if len(positions) != len(charges):
        raise ValueError("positions and charges differ in length")
    with Path(path).open("w") as fh:
        fh.write(f"{len(charges)}\n")
        for p, q in zip(positions, charges):
            fh.write(" ".join(repr(float(v)) for v in (*p, q)) + "\n")


def uniform_point_cloud(box: Box3, n: int, seed=None, neutral: bool = False):
    """Uniform positions in ``box`` with standard-normal charges."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform(box.lower, box.upper, size=(n, 3))
    q = rng.standard_normal(n)
    if neutral and n:
        q -= q.mean()
    return pos, q
