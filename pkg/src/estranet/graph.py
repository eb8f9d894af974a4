"""Snapshot graphs, edge-list ingestion and community contraction."""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

NodeId = Hashable
Partition = np.ndarray  # int64 label per internal node index


class ParseError(ValueError):
    """Malformed snapshot input. ``lineno`` is 1-based, ``None`` if not line-specific."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class SnapshotGraph:
    """One time slice: weighted undirected graph with dense internal indices.

    ``adj`` is a symmetric CSR matrix. Its diagonal holds self-loop weights,
    which are only nonzero on induced graphs. ``strength[u]`` is the row sum
    of ``adj`` (the diagonal counted once), so ``strength.sum() == 2 * total_weight``.
    """

    t: int
    nodes: tuple
    adj: sp.csr_matrix
    strength: np.ndarray = field(repr=False)
    total_weight: float

    @classmethod
    def from_edges(
        cls,
        t: int,
        edges: Iterable[tuple],
        nodes: Sequence | None = None,
        allow_self_loops: bool = False,
    ) -> "SnapshotGraph":
        """Build a snapshot from ``(u, v[, w])`` tuples; repeated pairs are summed.

        ``nodes`` fixes the internal order (and may include isolated nodes);
        otherwise nodes are indexed by first appearance.
        """
        index: dict = {}
        order: list = []
        if nodes is not None:
            for u in nodes:
                if u in index:
                    raise ValueError(f"duplicate node {u!r}")
                index[u] = len(order)
                order.append(u)
        rows, cols, vals = [], [], []
        for e in edges:
            u, v = e[0], e[1]
            w = float(e[2]) if len(e) > 2 else 1.0
            if not w > 0 or not np.isfinite(w):
                raise ValueError(f"edge ({u!r}, {v!r}) has nonpositive weight {w}")
            if u == v and not allow_self_loops:
                raise ValueError(f"self-loop on node {u!r}")
            for x in (u, v):
                if x not in index:
                    if nodes is not None:
                        raise ValueError(f"edge endpoint {x!r} not in node list")
                    index[x] = len(order)
                    order.append(x)
            rows.append(index[u])
            cols.append(index[v])
            vals.append(w)
        n = len(order)
        r = np.asarray(rows, dtype=np.int64)
        c = np.asarray(cols, dtype=np.int64)
        w = np.asarray(vals, dtype=np.float64)
        off = r != c
        # both directions for off-diagonal entries; a self-loop weight is stored once
        rr = np.concatenate([r[off], c[off], r[~off]])
        cc = np.concatenate([c[off], r[off], c[~off]])
        ww = np.concatenate([w[off], w[off], w[~off]])
        adj = sp.coo_matrix((ww, (rr, cc)), shape=(n, n)).tocsr()
        adj.sum_duplicates()
        return cls.from_matrix(t, tuple(order), adj)

    @classmethod
    def from_matrix(cls, t: int, nodes: Sequence, adj) -> "SnapshotGraph":
        adj = sp.csr_matrix(adj, dtype=np.float64, copy=True)
        adj.sum_duplicates()
        adj.sort_indices()
        adj.eliminate_zeros()
        if adj.shape != (len(nodes), len(nodes)):
            raise ValueError("adjacency shape does not match node count")
        if adj.nnz and adj.data.min() <= 0:
            raise ValueError("edge weights must be strictly positive")
        if abs(adj - adj.T).sum() > 1e-12 * max(1.0, adj.sum()):
            raise ValueError("adjacency is not symmetric")
        strength = np.asarray(adj.sum(axis=1)).ravel()
        total = 0.5 * float(strength.sum())
        adj.data.setflags(write=False)
        strength.setflags(write=False)
        return cls(t=int(t), nodes=tuple(nodes), adj=adj, strength=strength, total_weight=total)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def index(self) -> dict:
        """External id -> internal index."""
        return {u: i for i, u in enumerate(self.nodes)}

    @cached_property
    def self_loops(self) -> np.ndarray:
        return self.adj.diagonal()

    def edges(self) -> list[tuple]:
        """Off-diagonal edges as ``(u, v, w)`` external-id triples with ``i < j``."""
        upper = sp.triu(self.adj, k=1).tocoo()
        return [
            (self.nodes[i], self.nodes[j], float(w))
            for i, j, w in zip(upper.row, upper.col, upper.data)
        ]

    @property
    def n_edges(self) -> int:
        return int(sp.triu(self.adj, k=1).nnz)

    def weight(self, u, v) -> float:
        i, j = self.index.get(u), self.index.get(v)
        if i is None or j is None:
            return 0.0
        return float(self.adj[i, j])

    def csr_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, indices, data) with int64/int32/float64 dtypes for the kernels."""
        return _csr_arrays(self.adj)


def _csr_arrays(m: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.ascontiguousarray(m.indptr, dtype=np.int64),
        np.ascontiguousarray(m.indices, dtype=np.int32),
        np.ascontiguousarray(m.data, dtype=np.float64),
    )


@dataclass(frozen=True)
class NodeHierarchyMap:
    """Per-level maps from supernodes to original nodes.

    ``assignments[k][i]`` is the level-(k+1) supernode that level-k node ``i``
    was contracted into; level 0 nodes are the original nodes.
    """

    n_original: int
    assignments: tuple = ()

    @property
    def depth(self) -> int:
        return len(self.assignments)

    def then(self, assignment: np.ndarray) -> "NodeHierarchyMap":
        return NodeHierarchyMap(self.n_original, self.assignments + (np.asarray(assignment),))

    def supernode_of(self, level: int | None = None) -> np.ndarray:
        """Original node -> supernode index at ``level`` (default: deepest)."""
        level = self.depth if level is None else level
        cur = np.arange(self.n_original)
        for a in self.assignments[:level]:
            cur = a[cur]
        return cur

    def members(self, level: int | None = None) -> list[set[int]]:
        """Supernode -> set of original node indices at ``level``."""
        sup = self.supernode_of(level)
        size = int(sup.max()) + 1 if len(sup) else 0
        out: list[set[int]] = [set() for _ in range(size)]
        for i, s in enumerate(sup):
            out[s].add(i)
        return out

    def project(self, labels: np.ndarray, level: int | None = None) -> np.ndarray:
        """Lift a partition of the level graph to the original nodes."""
        return np.asarray(labels)[self.supernode_of(level)]


def compact_labels(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel to ``0..C-1`` in increasing order of the original label values."""
    uniq, inv = np.unique(np.asarray(labels), return_inverse=True)
    return inv.astype(np.int64).ravel(), len(uniq)


def membership_matrix(labels: np.ndarray) -> tuple[sp.csr_matrix, int]:
    comm, c = compact_labels(labels)
    n = len(comm)
    return sp.csr_matrix((np.ones(n), (np.arange(n), comm)), shape=(n, c)), c


def induce_graph(g: SnapshotGraph, p: Partition) -> tuple[SnapshotGraph, NodeHierarchyMap]:
    """Contract each community of ``p`` into a supernode.

    The supernode's self-loop is the ordered intra-community sum (twice the
    intra-community edge weight plus member self-loops); inter-supernode weights
    are summed. Supernodes are numbered in increasing label order.
    """
    p = np.asarray(p)
    if p.shape != (g.n,):
        raise ValueError("partition must label every node of the graph")
    h, c = membership_matrix(p)
    induced = (h.T @ g.adj @ h).tocsr()
    comm, _ = compact_labels(p)
    hierarchy = NodeHierarchyMap(g.n).then(comm)
    return SnapshotGraph.from_matrix(g.t, tuple(range(c)), induced), hierarchy


def parse_snapshot_lines(lines: Iterable[str], source: str | None = None) -> list[SnapshotGraph]:
    """Parse ``<t> <u> <v> [w]`` records into snapshots ordered by ``t``."""
    groups: list[tuple[int, list]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ParseError(f"expected '<t> <u> <v> [w]', got {len(parts)} fields", lineno, source)
        try:
            t = int(parts[0])
        except ValueError:
            raise ParseError(f"timestamp {parts[0]!r} is not an integer", lineno, source) from None
        if t < 0:
            raise ParseError(f"negative timestamp {t}", lineno, source)
        u, v = parts[1], parts[2]
        w = _parse_weight(parts[3] if len(parts) == 4 else None, lineno, source)
        if u == v:
            raise ParseError(f"self-loop on node {u!r}", lineno, source)
        if groups and t < groups[-1][0]:
            raise ParseError(f"timestamp {t} decreases (previous {groups[-1][0]})", lineno, source)
        if not groups or groups[-1][0] != t:
            groups.append((t, []))
        groups[-1][1].append((u, v, w))
    return [SnapshotGraph.from_edges(t, edges) for t, edges in groups]


def _parse_weight(tok: str | None, lineno: int, source: str | None) -> float:
    if tok is None:
        return 1.0
    try:
        w = float(tok)
    except ValueError:
        raise ParseError(f"weight {tok!r} is not a number", lineno, source) from None
    if not (w > 0) or not np.isfinite(w):
        raise ParseError(f"nonpositive or non-finite weight {tok}", lineno, source)
    return w


_EDGES_NAME = re.compile(r"^(\d+)\.edges$")


def load_snapshots(source) -> list[SnapshotGraph]:
    """Load snapshots from a file path, a directory of ``<t>.edges`` files, or a text/byte stream."""
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if path.is_dir():
            return _load_directory(path)
        with open(path, encoding="utf-8") as fh:
            return parse_snapshot_lines(fh, source=str(path))
    if isinstance(source, (bytes, bytearray)):
        return parse_snapshot_lines(io.StringIO(source.decode("utf-8")))
    stream = source
    if isinstance(stream, io.BufferedIOBase) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8")
    return parse_snapshot_lines(stream)


def _load_directory(path: Path) -> list[SnapshotGraph]:
    found = []
    for entry in path.iterdir():
        m = _EDGES_NAME.match(entry.name)
        if m:
            found.append((int(m.group(1)), entry))
    found.sort()
    out = []
    for t, entry in found:
        with open(entry, encoding="utf-8") as fh:
            records = (f"{t} {line}" if line.strip() and not line.lstrip().startswith("#") else line for line in fh)
            snaps = parse_snapshot_lines(records, source=str(entry))
        out.extend(snaps)
    return out


def write_snapshots(snapshots: Sequence[SnapshotGraph], dest) -> None:
    """Write snapshots in the ``<t> <u> <v> <w>`` format. Isolated nodes are not representable."""
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8") if own else dest
    try:
        for g in snapshots:
            for u, v, w in g.edges():
                fh.write(f"{g.t} {u} {v} {w!r}\n")
    finally:
        if own:
            fh.close()
