"""Hierarchical label propagation maximizing ``Q - lambda*E``.

The sweep loop and graph contraction run in the compiled kernel when it is
importable, otherwise in the pure-Python mirror. Set ``ESTRANET_BACKEND=python``
to force the fallback.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _fallback
from .graph import Partition, SnapshotGraph
from .quality import HistoryWeights

log = logging.getLogger(__name__)

if os.environ.get("ESTRANET_BACKEND", "").lower() == "python":
    _backend = _fallback
else:
    try:
        from . import _kernels as _backend
    except ImportError:  # no compiler at install time
        log.debug("compiled kernel unavailable, using pure-Python fallback")
        _backend = _fallback

BACKEND = "cython" if _backend is not _fallback else "python"

MAX_SWEEPS = 1000
LEVEL_EPS = 1e-10


class ConvergenceError(RuntimeError):
    """Label updates did not settle within ``max_sweeps``; ``partition`` holds the last state."""

    def __init__(self, message: str, partition: np.ndarray):
        super().__init__(message)
        self.partition = partition


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    max_sweeps: int = MAX_SWEEPS
    level_improvement_epsilon: float = LEVEL_EPS

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


def get_backend(name: str | None = None):
    if name is None:
        return _backend
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def prepare(g: SnapshotGraph, z: HistoryWeights | None = None, backend: str | None = None):
    """Convert ``(g, z)`` once into a kernel problem for repeated runs."""
    if z is None:
        z = HistoryWeights.empty(g.n)
    if z.n != g.n:
        raise ValueError("history weights do not match the graph")
    return get_backend(backend).Problem(*g.csr_arrays(), *z.csr_arrays())


def label_scores(x: int, g: SnapshotGraph, z: HistoryWeights, p: Partition, lam: float) -> dict:
    """Update-rule score of every candidate label for node ``x``.

    Candidates are the labels of ``x``'s neighbours and history partners plus
    its own label. Self-loops and ``Z_xx`` are excluded from the sums.
    """
    p = np.asarray(p)
    two_m = 2.0 * g.total_weight
    kx = float(g.strength[x])
    cur = int(p[x])
    k_lab: dict[int, float] = {}
    for u, lab in enumerate(p):
        k_lab[int(lab)] = k_lab.get(int(lab), 0.0) + float(g.strength[u])
    n_xl: dict[int, float] = {cur: 0.0}
    o_xl: dict[int, float] = {cur: 0.0}
    row = g.adj.getrow(x)
    for u, w in zip(row.indices, row.data):
        if u != x:
            lab = int(p[u])
            n_xl[lab] = n_xl.get(lab, 0.0) + float(w)
            o_xl.setdefault(lab, 0.0)
    zrow = z.matrix.getrow(x)
    for u, w in zip(zrow.indices, zrow.data):
        if u != x:
            lab = int(p[u])
            o_xl[lab] = o_xl.get(lab, 0.0) + float(w)
            n_xl.setdefault(lab, 0.0)
    return {
        lab: n_xl[lab] - kx * k_lab[lab] / two_m + (kx * kx / two_m if lab == cur else 0.0)
        + lam * o_xl[lab]
        for lab in n_xl
    }


def best_label(x: int, g: SnapshotGraph, z: HistoryWeights, p: Partition, lam: float) -> int:
    """Label maximizing the update score; keeps the current label on ties, else the smallest."""
    scores = label_scores(x, g, z, p, lam)
    cur = int(np.asarray(p)[x])
    top = max(scores.values())
    if scores[cur] >= top - _fallback.REL_MOVE_TOL * float(g.strength[x]):
        return cur
    return min(lab for lab, s in scores.items() if s == top)


def lpa_converge(
    g: SnapshotGraph,
    z: HistoryWeights | None,
    lam: float,
    init: Partition | None = None,
    cfg: RunConfig = RunConfig(),
    on_update: Callable[[int, int, int], None] | None = None,
) -> Partition:
    """Sweep label updates in seeded random order until a sweep changes nothing.

    ``on_update(x, old, new)`` is called after every label change (pure-Python
    backend only). Raises :class:`ConvergenceError` after ``cfg.max_sweeps``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if init is None:
        labels = np.arange(g.n, dtype=np.int64)
    else:
        labels, _ = _dense_labels(init)
    backend = "python" if on_update is not None else None
    problem = prepare(g, z, backend)
    out, sweeps, ok = problem.lpa_level(float(lam), labels, cfg.seed, cfg.max_sweeps, on_update)
    if not ok:
        raise ConvergenceError(f"labels still changing after {sweeps} sweeps", out)
    return out


def hlpa(
    g: SnapshotGraph,
    z: HistoryWeights | None,
    lam: float,
    cfg: RunConfig = RunConfig(),
    init: Partition | None = None,
    problem=None,
) -> tuple[Partition, float]:
    """Alternate label convergence with community contraction until no level improves.

    Returns the partition of the last improving level, projected onto the
    original nodes, and its ``Q - lam*E``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not g.total_weight > 0:
        raise ValueError("graph has no edges")
    if problem is None:
        problem = prepare(g, z)
    start = None if init is None else _dense_labels(init)[0]
    labels, obj, _, ok = problem.hlpa(
        float(lam), cfg.seed, cfg.max_sweeps, cfg.level_improvement_epsilon, start
    )
    if not ok:
        raise ConvergenceError(f"labels still changing after {cfg.max_sweeps} sweeps", labels)
    return labels, obj


def _dense_labels(p) -> tuple[np.ndarray, int]:
    uniq, inv = np.unique(np.asarray(p), return_inverse=True)
    return inv.astype(np.int64).ravel(), len(uniq)
