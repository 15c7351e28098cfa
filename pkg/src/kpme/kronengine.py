"""Sequential Kronecker matrix-vector products.

Vectors over a product grid ``X0 x ... x X{d-1}`` are stored lexicographically
with axis 0 slowest, so ``(A0 (x) A1) q`` has row index ``i0 * M1 + i1``.
The fast product never forms permutation matrices: each step unfolds the
current vector along one axis, multiplies, and folds it back.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

__all__ = [
    "DENSE_GUARD",
    "Factor",
    "KronOperand",
    "kron_dense",
    "kron_matvec_dense",
    "kron_matvec_shuffle",
    "matricize",
    "op_count_estimate",
    "vectorize",
]

DENSE_GUARD = 10**7


def matricize(v, k: int, shape) -> np.ndarray:
    """Unfold ``v`` over ``shape`` into a matrix whose rows are indexed by axis ``k``.

    Columns run over the remaining axes in their original lexicographic order.
    """
    shape = tuple(int(s) for s in shape)
    v = np.asarray(v)
    if v.size != prod(shape):
        raise ValueError(f"vector of size {v.size} does not match shape {shape}")
    t = v.reshape(shape)
    return np.moveaxis(t, k, 0).reshape(shape[k], -1)


def vectorize(mat, k: int, shape) -> np.ndarray:
    """Inverse of :func:`matricize`; ``shape`` is the shape of the folded result."""
    shape = tuple(int(s) for s in shape)
    mat = np.asarray(mat)
    if mat.shape[0] != shape[k] or mat.size != prod(shape):
        raise ValueError(f"matrix of shape {mat.shape} cannot fold along axis {k} into {shape}")
    rest = shape[:k] + shape[k + 1 :]
    return np.moveaxis(mat.reshape((shape[k],) + rest), 0, k).reshape(-1)


@dataclass(frozen=True)
class Factor:
    """One Kronecker factor, dense or as a product ``U @ V``."""

    dense_matrix: np.ndarray | None = None
    U: np.ndarray | None = None
    V: np.ndarray | None = None

    @classmethod
    def of(cls, f) -> "Factor":
        if isinstance(f, Factor):
            return f
        if isinstance(f, tuple):
            U, V = (np.asarray(x) for x in f)
            if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[0]:
                raise ValueError(f"factored form needs U (m, r) and V (r, n), got {U.shape}, {V.shape}")
            return cls(U=U, V=V)
        a = np.asarray(f)
        if a.ndim != 2:
            raise ValueError(f"Kronecker factors must be matrices, got shape {a.shape}")
        return cls(dense_matrix=a)

    @property
    def factored(self) -> bool:
        return self.dense_matrix is None

    @property
    def shape(self) -> tuple[int, int]:
        if self.factored:
            return self.U.shape[0], self.V.shape[1]
        return self.dense_matrix.shape

    @property
    def rank(self) -> int | None:
        return self.U.shape[1] if self.factored else None

    def dense(self) -> np.ndarray:
        return self.U @ self.V if self.factored else self.dense_matrix

    def apply(self, X: np.ndarray) -> np.ndarray:
        if self.factored:
            return self.U @ (self.V @ X)
        return self.dense_matrix @ X

    def mults_per_column(self) -> int:
        m, n = self.shape
        return self.rank * (m + n) if self.factored else m * n


class KronOperand:
    """``A = F0 (x) F1 (x) ... (x) F{d-1}``, factors dense or factored."""

    def __init__(self, factors):
        self.factors = [Factor.of(f) for f in factors]
        if not self.factors:
            raise ValueError("need at least one factor")

    @property
    def d(self) -> int:
        return len(self.factors)

    @property
    def row_shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def col_shape(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def shape(self) -> tuple[int, int]:
        return prod(self.row_shape), prod(self.col_shape)


def kron_dense(op: KronOperand, guard: int = DENSE_GUARD) -> np.ndarray:
    m, n = op.shape
    if m * n > guard:
        raise MemoryError(f"dense Kronecker product of {m}x{n} exceeds the {guard}-entry guard")
    out = np.ones((1, 1))
    for f in op.factors:
        out = np.kron(out, f.dense())
    return out


def kron_matvec_dense(op: KronOperand, q, guard: int = DENSE_GUARD) -> np.ndarray:
    q = np.asarray(q)
    if q.size != op.shape[1]:
        raise ValueError(f"vector of size {q.size} does not match operand with {op.shape[1]} columns")
    return kron_dense(op, guard) @ q.ravel()


def kron_matvec_shuffle(op: KronOperand, q, stats: dict | None = None) -> np.ndarray:
    """Reshape-based fast product, applying factors from the last axis to the first.

    ``stats["mults"]`` is incremented by the scalar multiplications performed.
    """
    q = np.asarray(q)
    shape = list(op.col_shape)
    if q.size != prod(shape):
        raise ValueError(f"vector of size {q.size} does not match operand with {prod(shape)} columns")
    phi = q.ravel()
    for p in range(op.d - 1, -1, -1):
        f = op.factors[p]
        cols = phi.size // shape[p]
        psi = f.apply(matricize(phi, p, shape))
        if stats is not None:
            stats["mults"] = stats.get("mults", 0) + f.mults_per_column() * cols
        shape[p] = f.shape[0]
        phi = vectorize(psi, p, shape)
    return phi


def op_count_estimate(op: KronOperand) -> int:
    """Scalar multiplications of :func:`kron_matvec_shuffle`.

    Step ``p`` sees axes ``< p`` at their column size and axes ``> p`` already
    at their row size; with ``d`` square ``L x L`` factors this is ``d L^(d+1)``.
    """
    rows, cols = op.row_shape, op.col_shape
    total = 0
    for p, f in enumerate(op.factors):
        others = prod(cols[:p]) * prod(rows[p + 1 :])
        total += f.mults_per_column() * others
    return total
