"""Evolving random networks with planted, link-reshuffling hidden groups."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .graph import SnapshotGraph


def _default_phases():
    return [(range(0, 20), tuple(range(0, 10))), (range(20, 40), tuple(range(9, 20)))]


@dataclass
class HiddenGroupSpec:
    """Snapshot count, background G(n, m) size, and which group is active when.

    ``phases`` is a list of ``(snapshot range, member nodes)``; ranges must
    tile ``0..n_snapshots-1``.
    """

    n_nodes: int = 40
    m_background: int = 80
    m_extra: int = 20
    phases: list = field(default_factory=_default_phases)
    n_snapshots: int = 40
    seed: int = 0

    def validate(self) -> None:
        n_pairs = self.n_nodes * (self.n_nodes - 1) // 2
        if self.n_nodes < 2 or self.n_snapshots < 1:
            raise ValueError("need at least two nodes and one snapshot")
        if not 0 <= self.m_background <= n_pairs:
            raise ValueError(f"m_background={self.m_background} exceeds {n_pairs} node pairs")
        covered = []
        for window, members in self.phases:
            if any(not 0 <= m < self.n_nodes for m in members):
                raise ValueError("phase member outside the node range")
            if len(set(members)) < 2 and self.m_extra > 0:
                raise ValueError("a phase group needs at least two members")
            if self.m_extra > len(set(members)) * (len(set(members)) - 1) // 2:
                raise ValueError("m_extra exceeds the number of group pairs")
            covered.extend(window)
        if sorted(covered) != list(range(self.n_snapshots)):
            raise ValueError("phase windows must cover every snapshot exactly once")

    def phase_of(self, t: int) -> int:
        for i, (window, _) in enumerate(self.phases):
            if t in window:
                return i
        raise ValueError(f"snapshot {t} is in no phase")


def generate(spec: HiddenGroupSpec) -> list[SnapshotGraph]:
    """One independent snapshot per time step, all unit weights, all ``n_nodes`` present."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_nodes
    all_pairs = list(combinations(range(n), 2))
    nodes = [str(i) for i in range(n)]
    out = []
    for t in range(spec.n_snapshots):
        picked = rng.choice(len(all_pairs), size=spec.m_background, replace=False)
        edges = {all_pairs[k] for k in picked}
        members = sorted(set(spec.phases[spec.phase_of(t)][1]))
        # uniform over group pairs not already drawn, as rejection sampling would give
        free = [pair for pair in combinations(members, 2) if pair not in edges]
        if len(free) < spec.m_extra:
            raise ValueError(
                f"snapshot {t}: only {len(free)} group pairs are free for {spec.m_extra} extra edges"
            )
        for k in rng.choice(len(free), size=spec.m_extra, replace=False):
            edges.add(free[k])
        out.append(
            SnapshotGraph.from_edges(t, [(str(i), str(j)) for i, j in sorted(edges)], nodes=nodes)
        )
    return out


def planted_cohesion(result, spec: HiddenGroupSpec) -> list[float]:
    """Per phase, the mean fraction of group-member pairs sharing a label."""
    values = []
    for window, members in spec.phases:
        ids = [str(m) for m in sorted(set(members))]
        n_pairs = len(ids) * (len(ids) - 1) // 2
        rates = []
        for t in window:
            labels = result.records[t].labels
            same = sum(
                1
                for a, b in combinations(ids, 2)
                if a in labels and b in labels and labels[a] == labels[b]
            )
            rates.append(same / n_pairs)
        values.append(float(np.mean(rates)))
    return values
