import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import barbell6, make_graph
from estranet.dual import SolverConfig
from estranet.graph import SnapshotGraph
from estranet.pipeline import (
    LabelRegistry,
    PipelineConfig,
    PipelineState,
    build_overlap_graph,
    map_labels,
    process_snapshot,
    run_pipeline,
)
from estranet.quality import compute_history, estrangement, modularity
from estranet.synthetic import HiddenGroupSpec, generate
from oracles import random_graph

FAST = PipelineConfig(SolverConfig(initial_runs=5, run_increment=5, max_runs=20, final_runs=30))

R, B, N = 100, 200, 300
R1, R2, M = 7, 8, 9


def split_merge_partitions():
    prev = {i: R for i in range(1, 11)} | {i: B for i in range(11, 16)} | {i: N for i in range(16, 19)}
    cur = {i: R1 for i in range(1, 8)} | {i: R2 for i in range(8, 11)} | {i: M for i in range(11, 19)}
    return prev, cur


def test_split_merge_example():
    prev, cur = split_merge_partitions()
    ov = build_overlap_graph(prev, cur)
    assert ov.jaccard[(R, R1)] == Fraction(7, 10)
    assert ov.jaccard[(R, R2)] == Fraction(3, 10)
    assert ov.jaccard[(B, M)] == Fraction(5, 8)
    assert ov.jaccard[(N, M)] == Fraction(3, 8)
    assert ov.right_partner[M] == B
    assert sorted(ov.mutual_pairs()) == [(R, R1), (B, M)]
    reg = LabelRegistry(400)
    out = map_labels(prev, cur, reg)
    assert all(out[i] == R for i in range(1, 8))
    assert all(out[i] == B for i in range(11, 19))
    assert all(out[i] == 400 for i in range(8, 11))
    assert N not in out.values()
    assert reg.next_label == 401


def test_identical_partitions_inherit_everything():
    p = {u: u % 3 for u in range(12)}
    reg = LabelRegistry(3)
    assert map_labels(p, p, reg) == p
    assert reg.next_label == 3


def test_new_singleton_gets_fresh_label():
    p = {u: u % 3 for u in range(12)}
    cur = dict(p) | {"new": 55}
    reg = LabelRegistry(10)
    out = map_labels(p, cur, reg)
    assert out["new"] == 10
    assert all(out[u] == p[u] for u in p)


def test_fresh_labels_follow_raw_label_order():
    reg = LabelRegistry(0)
    out = map_labels({}, {"a": 5, "b": 2, "c": 9}, reg)
    assert out == {"b": 0, "a": 1, "c": 2}


def test_partner_ties_prefer_larger_intersection_then_smaller_label():
    prev = {1: 0, 2: 0, 3: 1, 4: 1, 5: 1, 6: 1, 7: 1, 8: 1}
    cur = {1: 5, 2: 5, 3: 5, 4: 5, 5: 6, 6: 6, 7: 6, 8: 6}
    ov = build_overlap_graph(prev, cur)
    # J(0,5) = 2/4, J(1,5) = 2/8; J(1,6) = 4/6
    assert ov.right_partner[5] == 0
    # equal Jaccard 2/5: the larger intersection beats the smaller label
    prev = {i: 0 for i in range(4)} | {i: 1 for i in range(4, 15)}
    cur = {i: 0 for i in range(10)} | {i: 1 for i in range(10, 15)}
    ov = build_overlap_graph(prev, cur)
    assert ov.jaccard[(0, 0)] == ov.jaccard[(1, 0)] == Fraction(2, 5)
    assert ov.right_partner[0] == 1
    # equal Jaccard and equal intersection: the smaller label wins
    prev = {1: 3, 2: 3, 3: 1, 4: 1}
    cur = {1: 0, 2: 0, 3: 0, 4: 0}
    ov = build_overlap_graph(prev, cur)
    assert ov.jaccard[(3, 0)] == ov.jaccard[(1, 0)]
    assert ov.right_partner[0] == 1


def test_common_only_restricts_to_shared_nodes():
    prev = {i: 0 for i in range(1, 4)} | {i: 1 for i in range(4, 10)} | {i: 1 for i in range(11, 31)}
    cur = {i: 0 for i in range(1, 11)}
    full = build_overlap_graph(prev, cur)
    assert full.right_partner[0] == 0
    common = build_overlap_graph(prev, cur, common_only=True)
    assert common.right_partner[0] == 1


@st.composite
def partition_pair(draw):
    prev_nodes = draw(st.sets(st.integers(0, 30), min_size=1, max_size=25))
    cur_nodes = draw(st.sets(st.integers(0, 30), min_size=1, max_size=25))
    prev = {u: draw(st.integers(0, 5)) for u in sorted(prev_nodes)}
    cur = {u: draw(st.integers(0, 5)) for u in sorted(cur_nodes)}
    return prev, cur


@settings(max_examples=300, deadline=None)
@given(partition_pair(), st.booleans())
def test_mapping_is_bijective_relabeling(pp, common):
    prev, cur = pp
    reg = LabelRegistry(100)
    out = map_labels(prev, cur, reg, common)
    assert set(out) == set(cur)
    raw_to_new = {}
    for u in cur:
        raw_to_new.setdefault(cur[u], set()).add(out[u])
    assert all(len(v) == 1 for v in raw_to_new.values())
    assert len({next(iter(v)) for v in raw_to_new.values()}) == len(raw_to_new)
    ov = build_overlap_graph(prev, cur, common)
    for c, d in ov.mutual_pairs():
        assert {out[u] for u in cur if cur[u] == d} == {c}
    fresh = {lab for lab in out.values() if lab >= 100}
    assert fresh == set(range(100, reg.next_label))


@settings(max_examples=300, deadline=None)
@given(partition_pair())
def test_overlap_graph_invariants(pp):
    prev, cur = pp
    ov = build_overlap_graph(prev, cur)
    assert set(ov.left_partner) == set(prev.values())
    assert set(ov.right_partner) == set(cur.values())
    assert all(0 < j <= 1 for j in ov.jaccard.values())
    for c, d in ov.left_partner.items():
        if d is not None:
            best = max(j for (c2, _), j in ov.jaccard.items() if c2 == c)
            assert ov.jaccard[(c, d)] == best
        else:
            assert not any(c2 == c for c2, _ in ov.jaccard)


def _kept(prev, out):
    return sum(1 for u, lab in out.items() if prev.get(u) == lab)


@pytest.mark.xfail(strict=True, reason="mutual maximal Jaccard does not maximize kept labels locally")
def test_exchange_property_counterexample():
    # C' overlaps D more than C does, but most of C' has left the snapshot
    prev = {i: 0 for i in range(1, 4)} | {i: 1 for i in range(4, 10)} | {i: 1 for i in range(11, 31)}
    cur = {i: 5 for i in range(1, 11)}
    out = map_labels(prev, cur, LabelRegistry(10))
    assert out[1] == 0
    moved = {u: 1 for u in out}
    assert _kept(prev, moved) <= _kept(prev, out)


def test_single_snapshot_record(bb6):
    res = run_pipeline([bb6], 0.05, FAST)
    (rec,) = res.records
    assert rec.E == 0.0 and not rec.constrained
    assert rec.Q == pytest.approx(5 / 14, abs=1e-15)
    assert sorted(set(rec.labels.values())) == [0, 1]
    assert rec.labels[0] == rec.labels[1] == rec.labels[2] != rec.labels[3]


def test_repeated_barbell_zero_delta(bb6):
    reg = LabelRegistry()
    r0, s0 = process_snapshot(None, bb6, 0.0, FAST, reg)
    r1, s1 = process_snapshot(s0, barbell6(1), 0.0, FAST, reg)
    assert r1.labels == r0.labels
    assert r1.E == 0.0 and r1.Q == pytest.approx(5 / 14, abs=1e-15)
    assert r1.constrained


def test_disjoint_edges_solve_unconstrained():
    g0 = make_graph([(0, 1), (1, 2), (0, 2)], 6)
    g1 = SnapshotGraph.from_edges(1, [(3, 4), (4, 5), (3, 5), (2, 3)], nodes=range(6))
    reg = LabelRegistry()
    _, s0 = process_snapshot(None, g0, 0.0, FAST, reg)
    r1, _ = process_snapshot(s0, g1, 0.0, FAST, reg)
    assert not r1.constrained and r1.E == 0.0


def test_constant_graph_zero_delta_keeps_labels():
    rng = np.random.default_rng(4)
    g = random_graph(rng, 20, 0.25)
    snaps = [SnapshotGraph.from_matrix(t, g.nodes, g.adj) for t in range(6)]
    res = run_pipeline(snaps, 0.0, FAST)
    for rec in res.records:
        assert rec.labels == res.records[0].labels
        assert rec.E == 0.0


def test_delta_one_has_zero_loss():
    snaps = generate(HiddenGroupSpec(n_snapshots=4, phases=[(range(0, 4), tuple(range(10)))], seed=2))
    res = run_pipeline(snaps, 1.0, dataclasses.replace(FAST, report_loss=True))
    assert all(r.loss == 0.0 for r in res.records)


def test_pipeline_rejects_bad_input(bb6):
    with pytest.raises(ValueError):
        run_pipeline([], 0.1)
    with pytest.raises(ValueError):
        run_pipeline([bb6], 1.5)
    with pytest.raises(ValueError):
        run_pipeline([SnapshotGraph.from_edges(0, [], nodes=["a"])], 0.1)


def test_state_holds_one_snapshot_and_one_partition():
    assert [f.name for f in dataclasses.fields(PipelineState)] == ["graph", "labels"]
    snaps = generate(HiddenGroupSpec(n_snapshots=3, phases=[(range(0, 3), tuple(range(10)))]))
    reg = LabelRegistry()
    state = None
    for g in snaps:
        _, state = process_snapshot(state, g, 0.05, FAST, reg)
        assert state.graph is g
        assert state.labels.shape == (g.n,)


def _evolving(seed, n_snap=6):
    rng = np.random.default_rng(seed)
    out = []
    for t in range(n_snap):
        n = int(rng.integers(8, 16))
        g = random_graph(rng, n, 0.3, weighted=bool(seed % 2))
        keep = [u for u in g.nodes if rng.random() < 0.9] or list(g.nodes)
        out.append(SnapshotGraph.from_edges(t, [e for e in g.edges() if e[0] in keep and e[1] in keep]
                                            or g.edges()))
    return out


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([0.0, 0.02, 0.1, 1.0]))
def test_recorded_metrics_match_mapped_partitions(seed, delta):
    snaps = _evolving(seed)
    res = run_pipeline(snaps, delta, FAST)
    retired: set = set()
    seen: set = set()
    for i, (g, rec) in enumerate(zip(snaps, res.records)):
        p = np.array([rec.labels[u] for u in g.nodes])
        assert modularity(g, p) == pytest.approx(rec.Q, abs=1e-15)
        labs = set(rec.labels.values())
        assert not labs & retired
        if i:
            prev_g = snaps[i - 1]
            prev = np.array([res.records[i - 1].labels[u] for u in prev_g.nodes])
            z = compute_history(prev_g, prev, g)
            assert estrangement(g, z, p) == pytest.approx(rec.E, abs=1e-15)
            assert rec.E <= delta + 1e-9
            retired |= set(res.records[i - 1].labels.values()) - labs
        seen |= labs
    assert max(seen) < res.label_registry


def test_warm_start_runs_and_stays_feasible():
    snaps = _evolving(3)
    cfg = dataclasses.replace(FAST, warm_start=True)
    res = run_pipeline(snaps, 0.05, cfg)
    assert all(r.E <= 0.05 + 1e-9 for r in res.records)


def test_result_json_shape():
    res = run_pipeline([barbell6(0), barbell6(1)], 0.0, dataclasses.replace(FAST, report_loss=True))
    doc = res.to_json()
    assert list(doc) == ["delta", "seed", "snapshots"]
    rec = doc["snapshots"][1]
    assert list(rec) == ["t", "lambda_star", "final_lambda", "Q", "E", "q_unconstrained", "loss", "fallback", "labels"]
    assert all(isinstance(k, str) for k in rec["labels"])
