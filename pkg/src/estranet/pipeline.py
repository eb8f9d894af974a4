"""Online driver: constrained solve per snapshot, then label mapping across snapshots."""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .dual import SolverConfig, evaluate_dual, solve_dual
from .graph import SnapshotGraph
from .quality import HistoryWeights, compute_history, estrangement

log = logging.getLogger(__name__)


class LabelRegistry:
    """Issues community labels; a label is never issued twice."""

    def __init__(self, start: int = 0):
        self.next_label = start

    def fresh(self) -> int:
        lab = self.next_label
        self.next_label += 1
        return lab


@dataclass
class OverlapGraph:
    """Maximal-Jaccard partner of every community, in both directions.

    Keys of ``left_partner`` are labels at t-1, of ``right_partner`` raw labels at t.
    A community overlapping nothing on the other side has partner ``None``.
    """

    left_partner: dict
    right_partner: dict
    jaccard: dict  # (left label, right label) -> Fraction, overlapping pairs only

    def mutual_pairs(self) -> list[tuple]:
        return [
            (c, d)
            for c, d in self.left_partner.items()
            if d is not None and self.right_partner.get(d) == c
        ]


def _communities(p: Mapping, keep=None) -> dict:
    out: dict = {}
    for node, lab in p.items():
        if keep is None or node in keep:
            out.setdefault(lab, set()).add(node)
    return out


def build_overlap_graph(p_prev: Mapping, p_cur: Mapping, common_only: bool = False) -> OverlapGraph:
    """Jaccard overlaps between communities at t-1 and t with each side's best partner.

    Partner ties go to the larger intersection, then the smaller label.
    """
    keep = set(p_prev) & set(p_cur) if common_only else None
    left = _communities(p_prev, keep)
    right = _communities(p_cur, keep)
    inter: dict = {}
    for node, d in p_cur.items():
        if keep is not None and node not in keep:
            continue
        c = p_prev.get(node)
        if c is None:
            continue
        inter[(c, d)] = inter.get((c, d), 0) + 1
    jac = {
        (c, d): Fraction(k, len(left[c]) + len(right[d]) - k) for (c, d), k in inter.items()
    }

    def pick(options):
        best = None
        for lab, j, k in options:
            if best is None or (j, k) > best[1:] or ((j, k) == best[1:] and lab < best[0]):
                best = (lab, j, k)
        return None if best is None else best[0]

    by_left: dict = {c: [] for c in left}
    by_right: dict = {d: [] for d in right}
    for (c, d), j in jac.items():
        by_left[c].append((d, j, inter[(c, d)]))
        by_right[d].append((c, j, inter[(c, d)]))
    return OverlapGraph(
        {c: pick(opts) for c, opts in by_left.items()},
        {d: pick(opts) for d, opts in by_right.items()},
        jac,
    )


def map_labels(
    p_prev_mapped: Mapping,
    p_cur_raw: Mapping,
    registry: LabelRegistry,
    common_only: bool = False,
) -> dict:
    """Carry labels from t-1 to t between mutually maximal-overlap communities.

    Every other community at t gets a fresh label, issued in increasing order
    of its raw label. The result is a bijective relabeling of ``p_cur_raw``.
    """
    ov = build_overlap_graph(p_prev_mapped, p_cur_raw, common_only)
    inherit = {d: c for c, d in ov.mutual_pairs()}
    new_name = {}
    for d in sorted(set(p_cur_raw.values())):
        new_name[d] = inherit[d] if d in inherit else registry.fresh()
    return {node: new_name[d] for node, d in p_cur_raw.items()}


@dataclass
class PipelineConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    report_loss: bool = False
    warm_start: bool = False
    jaccard_common_only: bool = False


@dataclass(frozen=True)
class PipelineState:
    """Everything carried between snapshots: the previous graph and its mapped labels."""

    graph: SnapshotGraph
    labels: np.ndarray

    def as_dict(self) -> dict:
        return dict(zip(self.graph.nodes, self.labels.tolist()))


@dataclass
class SnapshotRecord:
    t: int
    labels: dict
    lambda_star: float
    final_lambda: float
    Q: float
    E: float
    fallback: bool = False
    q_unconstrained: float | None = None
    constrained: bool = True

    @property
    def loss(self) -> float | None:
        if self.q_unconstrained is None:
            return None
        return self.q_unconstrained - self.Q

    def to_json(self) -> dict:
        out = {
            "t": self.t,
            "lambda_star": self.lambda_star,
            "final_lambda": self.final_lambda,
            "Q": self.Q,
            "E": self.E,
        }
        if self.q_unconstrained is not None:
            out["q_unconstrained"] = self.q_unconstrained
            out["loss"] = self.loss
        out["fallback"] = self.fallback
        out["labels"] = {str(k): int(v) for k, v in self.labels.items()}
        return out


@dataclass
class TemporalResult:
    delta: float
    seed: int
    records: list = field(default_factory=list)
    label_registry: int = 0

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "seed": self.seed,
            "snapshots": [r.to_json() for r in self.records],
        }

    def labels_at(self, i: int) -> dict:
        return self.records[i].labels


def snapshot_seed(seed: int, t: int) -> int:
    key = struct.pack("<4sQq", b"snap", seed & 0xFFFFFFFFFFFFFFFF, t)
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def unconstrained_solve(g: SnapshotGraph, cfg: SolverConfig, seed: int):
    """Best-of-runs plain modularity maximization (``lambda = 0``, no history)."""
    return evaluate_dual(0.0, g, HistoryWeights.empty(g.n), 1.0, cfg.final_runs, seed, cfg)


def process_snapshot(
    state: PipelineState | None,
    g_t: SnapshotGraph,
    delta: float,
    cfg: PipelineConfig,
    registry: LabelRegistry,
) -> tuple[SnapshotRecord, PipelineState]:
    """Solve one snapshot against the previous one and map its labels."""
    if not g_t.total_weight > 0:
        raise ValueError(f"snapshot t={g_t.t} has no edges")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    solver = cfg.solver
    seed = snapshot_seed(solver.seed, g_t.t)
    q_unc = None
    constrained = False
    fallback = False
    lam_star = final_lam = 0.0

    if state is None:
        ev = unconstrained_solve(g_t, solver, seed)
        raw, q, e = ev.best_partition, ev.best_Q, 0.0
        q_unc = q
    else:
        z = compute_history(state.graph, state.labels, g_t)
        shortcut = None
        if delta >= 1.0 or z.is_empty():
            if z.is_empty() and delta < 1.0:
                log.info("t=%s: no surviving co-labeled edges; solving unconstrained", g_t.t)
            ev = unconstrained_solve(g_t, solver, seed)
            q_unc = ev.best_Q
            # weighted history can push E above 1, so delta = 1 is not always vacuous
            if estrangement(g_t, z, ev.best_partition) <= delta + 1e-12:
                shortcut = ev
        if shortcut is not None:
            raw, q = shortcut.best_partition, shortcut.best_Q
            e = estrangement(g_t, z, raw)
        else:
            constrained = True
            prev = np.array([state.graph.index.get(u, -1) for u in g_t.nodes], dtype=np.int64)
            prev_labels = np.where(prev >= 0, state.labels[np.maximum(prev, 0)], -1)
            init = _warm_start(prev_labels) if cfg.warm_start else None
            res = solve_dual(g_t, z, delta, solver, prev_labels, seed, init)
            raw, q, e = res.partition, res.Q, res.E
            lam_star, final_lam, fallback = res.lambda_star, res.final_lambda, res.feasibility_fallback_used

    if cfg.report_loss and q_unc is None:
        q_unc = unconstrained_solve(g_t, solver, seed).best_Q
    prev_map = state.as_dict() if state is not None else {}
    mapped = map_labels(
        prev_map, dict(zip(g_t.nodes, raw.tolist())), registry, cfg.jaccard_common_only
    )
    labels = np.array([mapped[u] for u in g_t.nodes], dtype=np.int64)
    record = SnapshotRecord(
        t=g_t.t,
        labels=mapped,
        lambda_star=float(lam_star),
        final_lambda=float(final_lam),
        Q=float(q),
        E=float(e),
        fallback=fallback,
        q_unconstrained=None if (q_unc is None or not cfg.report_loss) else float(q_unc),
        constrained=constrained,
    )
    return record, PipelineState(g_t, labels)


def _warm_start(prev_labels: np.ndarray) -> np.ndarray:
    out = prev_labels.copy()
    nxt = out.max() + 1 if len(out) else 0
    for i in np.flatnonzero(out < 0):
        out[i] = nxt
        nxt += 1
    return np.unique(out, return_inverse=True)[1].astype(np.int64).ravel()


def run_pipeline(
    snapshots: Iterable[SnapshotGraph],
    delta: float,
    cfg: PipelineConfig | None = None,
) -> TemporalResult:
    """Fold :func:`process_snapshot` over the snapshots, keeping only the previous step."""
    cfg = cfg or PipelineConfig()
    registry = LabelRegistry()
    result = TemporalResult(delta=delta, seed=cfg.solver.seed)
    state = None
    for g in snapshots:
        record, state = process_snapshot(state, g, delta, cfg, registry)
        result.records.append(record)
    if not result.records:
        raise ValueError("need at least one snapshot")
    result.label_registry = registry.next_label
    return result
