"""Pure-numpy particle/grid kernels; the reference for the compiled variant."""

import numpy as np


def lagrange_weights(nodes, t):
    """Equispaced Lagrange basis on reference ``nodes`` evaluated at ``t``; shape (n, L)."""
    nodes = np.asarray(nodes, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    L = nodes.shape[0]
    w = np.ones((t.shape[0], L))
    for k in range(L):
        for j in range(L):
            if j != k:
                w[:, k] *= (t - nodes[j]) / (nodes[k] - nodes[j])
    return w


def spread(wx, wy, wz, q):
    """Grid values ``g[a,b,c] = sum_n q_n wx[n,a] wy[n,b] wz[n,c]``."""
    return np.einsum("na,nb,nc->abc", wx * np.asarray(q)[:, None], wy, wz, optimize=True)


def gather(wx, wy, wz, g):
    """Particle values ``v_n = sum_abc g[a,b,c] wx[n,a] wy[n,b] wz[n,c]``."""
    t = np.einsum("abc,nc->nab", g, wz, optimize=True)
    t = np.einsum("nab,nb->na", t, wy)
    return np.einsum("na,na->n", t, wx)
