from itertools import combinations

import numpy as np
import pytest

from estranet.graph import SnapshotGraph

BARBELL6_EDGES = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]
K4_EDGES = list(combinations(range(4), 2))


def make_graph(edges, n=None, t=0):
    n = n if n is not None else 1 + max(max(u, v) for u, v, *_ in edges)
    rows = [(u, v, w[0] if w else 1.0) for u, v, *w in edges]
    return SnapshotGraph.from_edges(t, rows, nodes=list(range(n)))


def barbell6(t=0):
    return make_graph(BARBELL6_EDGES, 6, t)


def small_corpus():
    """At least 20 simple graphs on at most 8 nodes, named."""
    out = {
        "barbell6": BARBELL6_EDGES,
        "k4": K4_EDGES,
        "path5": [(i, i + 1) for i in range(4)],
        "cycle6": [(i, (i + 1) % 6) for i in range(6)],
        "cycle8": [(i, (i + 1) % 8) for i in range(8)],
        "star7": [(0, i) for i in range(1, 7)],
        "k33": [(u, v) for u in range(3) for v in range(3, 6)],
        "k5": list(combinations(range(5), 2)),
        "two_k4_bridge": list(combinations(range(4), 2))
        + [(u + 4, v + 4) for u, v in combinations(range(4), 2)]
        + [(3, 4)],
        "single_edge": [(0, 1)],
        "triangle_tail": [(0, 1), (1, 2), (0, 2), (2, 3)],
    }
    rng = np.random.default_rng(2024)
    i = 0
    while len(out) < 24:
        n = int(rng.integers(4, 9))
        edges = [e for e in combinations(range(n), 2) if rng.random() < 0.45]
        if edges and len({x for e in edges for x in e}) == n:
            out[f"gnp_{i}"] = edges
        i += 1
    return out


@pytest.fixture
def bb6():
    return barbell6()
