"""Partition scores: modularity, estrangement, the Lagrangian and temporal stability.

All pair sums use the ordered double sum divided by ``2M`` (equivalently,
unordered pairs divided by ``M``), where ``M`` is the total edge weight of
the current snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Partition, SnapshotGraph, _csr_arrays, membership_matrix


class EmptyGraphError(ValueError):
    """Raised when a score needs ``M > 0`` but the snapshot has no edge weight."""


@dataclass(frozen=True, eq=False)
class HistoryWeights:
    """Co-affiliation memory ``Z`` over node pairs of the current snapshot.

    ``matrix`` is symmetric over internal indices of the current graph. Its
    diagonal is zero for input snapshots; on induced graphs it stores the
    ordered intra-supernode sum (each unordered pair counted twice), matching
    the self-loop convention of the adjacency.
    """

    matrix: sp.csr_matrix
    prev_t: int | None = None

    @classmethod
    def empty(cls, n: int, prev_t: int | None = None) -> "HistoryWeights":
        return cls(sp.csr_matrix((n, n), dtype=np.float64), prev_t)

    @classmethod
    def from_pairs(cls, n: int, pairs: dict, prev_t: int | None = None) -> "HistoryWeights":
        """Build from ``{(i, j): z}`` over internal indices (unordered, ``i != j``)."""
        rows, cols, vals = [], [], []
        for (i, j), z in pairs.items():
            if i == j:
                raise ValueError("history weights are defined on distinct node pairs")
            if z < 0:
                raise ValueError("history weights must be nonnegative")
            if z == 0:
                continue
            rows += [i, j]
            cols += [j, i]
            vals += [z, z]
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m, prev_t)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def is_empty(self) -> bool:
        return self.matrix.nnz == 0 or not self.matrix.data.any()

    def pairs(self) -> dict[tuple[int, int], float]:
        """Off-diagonal entries as ``{(i, j): z}`` with ``i < j``."""
        upper = sp.triu(self.matrix, k=1).tocoo()
        return {(int(i), int(j)): float(z) for i, j, z in zip(upper.row, upper.col, upper.data)}

    def total(self) -> float:
        """Ordered sum of all entries, diagonal included."""
        return math.fsum(self.matrix.data)

    def csr_arrays(self):
        return _csr_arrays(self.matrix)


def induce_history(z: HistoryWeights, p: Partition) -> HistoryWeights:
    """Aggregate ``Z`` onto the supernodes of ``p``, diagonal included."""
    h, _ = membership_matrix(p)
    m = (h.T @ z.matrix @ h).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return HistoryWeights(m, z.prev_t)


def compute_history(g_prev: SnapshotGraph, p_prev: Partition, g_cur: SnapshotGraph) -> HistoryWeights:
    """``Z_uv = sqrt(A_prev[u,v] * A_cur[u,v])`` on edges of both snapshots co-labeled in ``p_prev``."""
    p_prev = np.asarray(p_prev)
    if p_prev.shape != (g_prev.n,):
        raise ValueError("p_prev must label every node of g_prev")
    upper = sp.triu(g_cur.adj, k=1).tocoo()
    if upper.nnz == 0:
        return HistoryWeights.empty(g_cur.n, g_prev.t)
    to_prev = np.array([g_prev.index.get(u, -1) for u in g_cur.nodes], dtype=np.int64)
    pi, pj = to_prev[upper.row], to_prev[upper.col]
    shared = (pi >= 0) & (pj >= 0)
    keep = np.zeros(upper.nnz, dtype=bool)
    keep[shared] = p_prev[pi[shared]] == p_prev[pj[shared]]
    w_prev = np.zeros(upper.nnz)
    if keep.any():
        w_prev[keep] = np.asarray(g_prev.adj[pi[keep], pj[keep]]).ravel()
    keep &= w_prev > 0
    pairs = {
        (int(i), int(j)): math.sqrt(a * b)
        for i, j, a, b in zip(upper.row[keep], upper.col[keep], w_prev[keep], upper.data[keep])
    }
    return HistoryWeights.from_pairs(g_cur.n, pairs, prev_t=g_prev.t)


def _check(g: SnapshotGraph, p: Partition) -> np.ndarray:
    p = np.asarray(p)
    if p.shape != (g.n,):
        raise ValueError("partition must label every node of the graph")
    if not g.total_weight > 0:
        raise EmptyGraphError(f"snapshot t={g.t} has no edge weight")
    return p


def _intra_sum(m: sp.csr_matrix, p: np.ndarray) -> float:
    """Ordered sum of entries whose endpoints share a label (diagonal included)."""
    coo = m.tocoo()
    same = p[coo.row] == p[coo.col]
    return math.fsum(coo.data[same])


def modularity(g: SnapshotGraph, p: Partition) -> float:
    """Weighted modularity via community sums ``sum_c e_c/M - (K_c/2M)^2``.

    ``e_c`` counts self-loops as ``A_uu/2``, so induced graphs score the same
    as the graphs they were contracted from.
    """
    p = _check(g, p)
    two_m = 2.0 * g.total_weight
    coo = g.adj.tocoo()
    same = p[coo.row] == p[coo.col]
    comm = np.unique(p, return_inverse=True)[1].ravel()
    intra = np.bincount(comm[coo.row[same]], weights=coo.data[same], minlength=comm.max() + 1)
    k_c = np.bincount(comm, weights=g.strength, minlength=comm.max() + 1)
    return math.fsum(intra / two_m) - math.fsum((k_c / two_m) ** 2)


def estrangement(g_cur: SnapshotGraph, z: HistoryWeights, p_cur: Partition) -> float:
    """Z-weighted fraction of historical pairs whose endpoints no longer share a label."""
    p = _check(g_cur, p_cur)
    if z.n != g_cur.n:
        raise ValueError("history weights do not match the snapshot")
    upper = sp.triu(z.matrix, k=1).tocoo()
    split = p[upper.row] != p[upper.col]
    return math.fsum(upper.data[split]) / g_cur.total_weight


def search_objective(g: SnapshotGraph, z: HistoryWeights, p: Partition, lam: float) -> float:
    """``Q - lam * E``: the partition-dependent part of the Lagrangian."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return modularity(g, p) - lam * estrangement(g, z, p)


def lagrangian(g: SnapshotGraph, z: HistoryWeights, p: Partition, lam: float, delta: float) -> float:
    """``Q - lam * (E - delta)``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return modularity(g, p) - lam * estrangement(g, z, p) + lam * delta


def temporal_stability(g: SnapshotGraph, z: HistoryWeights, p: Partition) -> float:
    """Random-walk temporal stability; identically ``-estrangement``."""
    p = _check(g, p)
    if z.n != g.n:
        raise ValueError("history weights do not match the snapshot")
    upper = sp.triu(z.matrix, k=1).tocoo()
    kept = p[upper.row] == p[upper.col]
    # one correctly rounded sum of kept minus all terms; the diagonal cancels
    terms = np.concatenate([upper.data[kept], -upper.data])
    return math.fsum(terms) / g.total_weight
