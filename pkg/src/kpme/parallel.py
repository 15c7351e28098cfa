"""Split parallel Kronecker products and the distributed reciprocal-sum driver.

Ranks form a ``K0 x K1 x K2`` grid with one cell each.  They run on threads
inside one process and talk only through :class:`RankComm`.  Every
reduction adds contributions in ascending rank order, so results do not
depend on thread scheduling and repeated runs are bit-identical.
"""

from __future__ import annotations

import csv
import os
import threading
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import product
from math import prod
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .alphaskp import EwaldConfig, SkpDecomposition
from .geometry import Box3, CellGrid, assign_particles, build_cell_grid
from .interpolation import InterpGrid1D, cell_weights
from .kronengine import matricize, vectorize
from .symfourier import VFactor, build_v

__all__ = [
    "CommunicatorError",
    "KpmePlan",
    "KpmeResult",
    "LedgerRecord",
    "RankComm",
    "RankGrid",
    "SimWorld",
    "build_plan",
    "kpme_apply",
    "message_ledger",
    "run_kpme",
    "spkmv",
    "spkmv_fused",
    "write_ledger_csv",
]

ALL = "all"
_WAIT_TIMEOUT = 120.0


class CommunicatorError(RuntimeError):
    """A collective could not complete, usually because another rank failed."""


@dataclass(frozen=True)
class RankGrid:
    shape: tuple[int, int, int]

    def __post_init__(self):
        shape = tuple(int(k) for k in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"rank grid needs three positive counts, got {self.shape}")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def cubic(cls, K: int) -> "RankGrid":
        return cls((K, K, K))

    @property
    def size(self) -> int:
        return prod(self.shape)

    def index(self, rank: int) -> tuple[int, int, int]:
        return tuple(int(v) for v in np.unravel_index(rank, self.shape))

    def rank(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def indices(self):
        return product(*(range(k) for k in self.shape))

    def group(self, axis: int, index) -> list[int]:
        """Ranks that agree with ``index`` on every axis except ``axis``, ascending."""
        members = []
        for v in range(self.shape[axis]):
            j = list(index)
            j[axis] = v
            members.append(self.rank(j))
        return members

    def group_key(self, axis: int, index) -> tuple[int, ...]:
        return tuple(v for a, v in enumerate(index) if a != axis)


@dataclass(frozen=True)
class LedgerRecord:
    rank: int
    step: int
    group_axis: int | str
    payload_count: int


class _Slot:
    __slots__ = ("members", "parts", "result", "reads")

    def __init__(self, members):
        self.members = members
        self.parts = {}
        self.result = None
        self.reads = 0


class SimWorld:
    """In-process rank world: thread per rank, ordered rendezvous reductions.

    ``max_threads`` (default ``KPME_THREADS`` or the CPU count) caps how many
    ranks compute at once; ranks waiting in a collective do not count.
    """

    def __init__(self, grid: RankGrid, max_threads: int | None = None):
        self.grid = grid
        if max_threads is None:
            env = os.environ.get("KPME_THREADS")
            max_threads = int(env) if env else (os.cpu_count() or 1)
        if max_threads < 1:
            raise ValueError("thread cap must be at least 1")
        self.max_threads = max_threads
        self._cond = threading.Condition()
        self._slots: dict[tuple, _Slot] = {}
        self._compute = threading.Semaphore(max_threads)
        self._failure: BaseException | None = None
        self.ledger: list[LedgerRecord] = []

    def comm(self, rank: int) -> "RankComm":
        return RankComm(self, rank)

    def _collective(self, comm: "RankComm", key: tuple, members: list[int], data: np.ndarray) -> np.ndarray:
        self._compute.release()
        try:
            with self._cond:
                slot = self._slots.setdefault(key, _Slot(members))
                if slot.members != members:
                    raise CommunicatorError(f"rank {comm.rank} joined {key} with a different group")
                slot.parts[comm.rank] = data
                if len(slot.parts) == len(members):
                    shapes = {p.shape for p in slot.parts.values()}
                    if len(shapes) != 1:
                        self._failure = CommunicatorError(f"shape mismatch in {key}: {sorted(shapes)}")
                        self._cond.notify_all()
                        raise self._failure
                    acc = np.array(slot.parts[members[0]], dtype=float, copy=True)
                    for r in members[1:]:
                        acc += slot.parts[r]
                    slot.result = acc
                    self._cond.notify_all()
                ok = self._cond.wait_for(
                    lambda: slot.result is not None or self._failure is not None, timeout=_WAIT_TIMEOUT
                )
                if slot.result is None:
                    if self._failure is not None:
                        raise CommunicatorError(f"rank {comm.rank}: collective {key} aborted") from self._failure
                    if not ok:
                        raise CommunicatorError(f"rank {comm.rank}: collective {key} timed out")
                out = slot.result.copy()
                slot.reads += 1
                if slot.reads == len(members):
                    del self._slots[key]
                return out
        finally:
            self._compute.acquire()

    def run(self, fn: Callable[["RankComm"], object]) -> list:
        """Run ``fn(comm)`` on every rank and return the results in rank order."""
        self._failure = None
        self._slots.clear()
        self.ledger = []
        results: list = [None] * self.grid.size
        errors: dict[int, BaseException] = {}

        def body(rank):
            self._compute.acquire()
            try:
                results[rank] = fn(self.comm(rank))
            except BaseException as exc:
                errors[rank] = exc
                with self._cond:
                    if self._failure is None:
                        self._failure = exc
                    self._cond.notify_all()
            finally:
                self._compute.release()

        threads = [threading.Thread(target=body, args=(r,), daemon=True) for r in range(self.grid.size)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            # report the root cause rather than the ranks it brought down
            root = [e for e in errors.values() if not isinstance(e, CommunicatorError)]
            raise (root or list(errors.values()))[0]
        self.ledger.sort(key=lambda r: (r.rank, r.step))
        return results


class RankComm:
    """One rank's view of a :class:`SimWorld`."""

    def __init__(self, world: SimWorld, rank: int):
        self.world = world
        self.rank = rank
        self.index = world.grid.index(rank)
        self._step = 0
        self._seq: Counter = Counter()

    @property
    def grid(self) -> RankGrid:
        return self.world.grid

    def _record(self, axis, count: int) -> None:
        with self.world._cond:
            self.world.ledger.append(LedgerRecord(self.rank, self._step, axis, count))
        self._step += 1

    def reduce_axis(self, axis: int, data) -> np.ndarray:
        """Sum ``data`` over the ranks that differ from this one only along ``axis``."""
        data = np.asarray(data, dtype=float)
        gkey = self.grid.group_key(axis, self.index)
        seq = self._seq[(axis, gkey)]
        self._seq[(axis, gkey)] += 1
        self._record(axis, data.size)
        return self.world._collective(self, (axis, gkey, seq), self.grid.group(axis, self.index), data)

    def allreduce(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        seq = self._seq[ALL]
        self._seq[ALL] += 1
        self._record(ALL, data.size)
        return self.world._collective(self, (ALL, seq), list(range(self.grid.size)), data)


# -- split parallel Kronecker mat-vec -----------------------------------------------


def _check_factors(factors, shape) -> None:
    if len(factors) != len(shape):
        raise ValueError(f"{len(factors)} factor pairs for a {len(shape)}-axis vector")
    for p, (U, V) in enumerate(factors):
        if U.shape[1] != V.shape[0] or V.shape[1] != shape[p]:
            raise ValueError(f"axis {p}: U {U.shape} and V {V.shape} do not conform with {shape[p]} columns")


def spkmv(comm: RankComm, factors: Sequence[tuple[np.ndarray, np.ndarray]], q, shape=None) -> np.ndarray:
    """Local slice of ``(x)_p (sum_j U_{i_p} V_{j_p}) q``.

    ``factors[p] = (U, V)`` are this rank's own factors on axis ``p``; ``q``
    is its local vector over ``shape`` (default: the column sizes of ``V``).
    """
    shape = [V.shape[1] for _, V in factors] if shape is None else list(shape)
    _check_factors(factors, shape)
    phi = np.asarray(q, dtype=float).ravel()
    for p in range(len(shape) - 1, -1, -1):
        U, V = factors[p]
        y = comm.reduce_axis(p, V @ matricize(phi, p, shape))
        shape[p] = U.shape[0]
        phi = vectorize(U @ y, p, shape)
    return phi


def spkmv_fused(comm: RankComm, factor_sets, q, shape=None) -> np.ndarray:
    """Sum of :func:`spkmv` over several operands with one reduction per axis.

    The intermediates of all operands are stacked, so the payload grows with
    their number while the message count stays at one per axis.
    """
    factor_sets = list(factor_sets)
    q = np.asarray(q, dtype=float).ravel()
    if not factor_sets:
        return np.zeros(0 if shape is None else prod(shape))
    base = [V.shape[1] for _, V in factor_sets[0]] if shape is None else list(shape)
    for fs in factor_sets:
        _check_factors(fs, base)
    shapes = [list(base) for _ in factor_sets]
    phis = [q] * len(factor_sets)
    for p in range(len(base) - 1, -1, -1):
        stacked = np.stack([fs[p][1] @ matricize(phi, p, sh) for fs, phi, sh in zip(factor_sets, phis, shapes)])
        stacked = comm.reduce_axis(p, stacked)
        for t, fs in enumerate(factor_sets):
            shapes[t][p] = fs[p][0].shape[0]
            phis[t] = vectorize(fs[p][0] @ stacked[t], p, shapes[t])
    out = phis[0].copy()
    for phi in phis[1:]:
        out += phi
    return out


# -- reciprocal-sum driver -----------------------------------------------------------


@dataclass
class KpmePlan:
    """Everything the ranks share: parameters, cell grid and cached axis factors."""

    cfg: EwaldConfig
    grid: CellGrid
    L: int
    dec: SkpDecomposition
    _factors: dict = field(default_factory=dict, repr=False)

    def axis_factors(self, axis: int, i: int) -> list[VFactor]:
        """One :class:`VFactor` per term for slab ``i`` along ``axis``."""
        key = (axis, i)
        if key not in self._factors:
            box = self.grid.box
            nodes = InterpGrid1D(self.L).mapped(*self.grid.interval(axis, i))
            phase = (nodes - box.center[axis]) / box.period
            self._factors[key] = [build_v(t, axis, phase, self.cfg.M) for t in self.dec.terms]
        return self._factors[key]

    def rank_factors(self, index) -> list[list[tuple[np.ndarray, np.ndarray]]]:
        """Per term, the ``(U, V)`` pairs of cell ``index`` on each axis."""
        per_axis = [self.axis_factors(a, index[a]) for a in range(3)]
        return [[(f.left, f.matrix) for f in fs] for fs in zip(*per_axis)]


def build_plan(cfg: EwaldConfig, grid: CellGrid, L: int, dec: SkpDecomposition) -> KpmePlan:
    if dec.M != cfg.M:
        raise ValueError(f"decomposition built for M={dec.M}, configuration has M={cfg.M}")
    InterpGrid1D(L)
    plan = KpmePlan(cfg, grid, L, dec)
    for axis in range(3):
        for i in range(grid.shape[axis]):
            plan.axis_factors(axis, i)
    return plan


def kpme_apply(comm: RankComm, plan: KpmePlan, positions, charges, fuse: bool = False) -> np.ndarray:
    """This rank's reciprocal potentials; its particles must lie in its own cell."""
    if comm.grid.shape != plan.grid.shape:
        raise ValueError(f"rank grid {comm.grid.shape} does not match cell grid {plan.grid.shape}")
    q = np.asarray(charges, dtype=float).ravel()
    total = comm.allreduce(np.array([q.sum()]))[0]
    c_total = plan.dec.correction * total
    L = plan.L
    cw = cell_weights(plan.grid, comm.index, positions, L)
    if len(q) != len(cw.particles):
        raise ValueError(f"{len(q)} charges for {len(cw.particles)} particles")
    phi = kernels.spread(cw.wx, cw.wy, cw.wz, q).ravel()
    terms = plan.rank_factors(comm.index)
    if fuse:
        acc = spkmv_fused(comm, terms, phi, (L, L, L)) if terms else np.zeros(L**3)
    else:
        # fresh accumulator: the grid charges phi are reused for every term
        acc = np.zeros(L**3)
        for fs in terms:
            acc += spkmv(comm, fs, phi, (L, L, L))
    psi = kernels.gather(cw.wx, cw.wy, cw.wz, acc.reshape(L, L, L))
    return psi - c_total


@dataclass
class KpmeResult:
    potentials: np.ndarray
    ledger: list[LedgerRecord]
    cells: tuple[int, int, int]
    wall_ms: float


def run_kpme(
    positions,
    charges,
    cfg: EwaldConfig,
    box: Box3,
    L: int,
    dec: SkpDecomposition,
    cells=(1, 1, 1),
    fuse: bool = False,
    max_threads: int | None = None,
    plan: KpmePlan | None = None,
) -> KpmeResult:
    """Distribute particles over a simulated rank grid, apply, and gather in input order."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float)).reshape(-1, 3)
    charges = np.asarray(charges, dtype=float).ravel()
    if len(charges) != len(positions):
        raise ValueError(f"{len(charges)} charges for {len(positions)} particles")
    grid = plan.grid if plan is not None else build_cell_grid(box, cells)
    plan = plan or build_plan(cfg, grid, L, dec)
    parts = assign_particles(grid, positions)
    world = SimWorld(RankGrid(grid.shape), max_threads)

    def body(comm):
        idx = parts[comm.rank]
        return kpme_apply(comm, plan, positions[idx], charges[idx], fuse=fuse)

    t0 = time.perf_counter()
    local = world.run(body)
    wall = (time.perf_counter() - t0) * 1e3
    out = np.zeros(len(positions))
    for idx, z in zip(parts, local):
        out[idx] = z
    return KpmeResult(out, world.ledger, grid.shape, wall)


# -- message accounting --------------------------------------------------------------


def message_ledger(records: Sequence[LedgerRecord]) -> dict[int, dict]:
    """Per-rank counts: axis reductions, their payload sizes, and global all-reduces."""
    summary: dict[int, dict] = defaultdict(
        lambda: {"axis_reductions": 0, "axis_payloads": [], "allreduces": 0, "allreduce_payload": 0}
    )
    for r in records:
        s = summary[r.rank]
        if r.group_axis == ALL:
            s["allreduces"] += 1
            s["allreduce_payload"] += r.payload_count
        else:
            s["axis_reductions"] += 1
            s["axis_payloads"].append(r.payload_count)
    return dict(summary)


def write_ledger_csv(path, records: Sequence[LedgerRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "step", "group_axis", "payload_count"])
        for r in records:
            w.writerow([r.rank, r.step, r.group_axis, r.payload_count])
