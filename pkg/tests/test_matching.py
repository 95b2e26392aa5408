import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import max_matching_size
from seqoffload.errors import DomainError
from seqoffload.matching import (
    CandidateGraph, build_candidates, has_capacity, in_v2v_range, max_match, promote,
)
from seqoffload.model import ChannelParams, Role, SequentialTask, Vehicle


def _veh(vid, x, v, cpu=1e10, y=1.875):
    return Vehicle(vid, (x, y), v, cpu, 1e-23)


def test_boundary_accepts_closing_gap():
    rear, front = _veh(1, 0.0, 30.0), _veh(2, 70.0, 25.0)
    assert in_v2v_range(rear, front, 70.0)
    assert in_v2v_range(front, rear, 70.0)


def test_boundary_rejects_equal_speeds():
    assert not in_v2v_range(_veh(1, 0.0, 30.0), _veh(2, 70.0, 30.0), 70.0)


def test_boundary_rejects_opening_gap():
    assert not in_v2v_range(_veh(1, 0.0, 25.0), _veh(2, 70.0, 30.0), 70.0)


def test_inside_and_outside_range():
    assert in_v2v_range(_veh(1, 0.0, 20.0), _veh(2, 40.0, 30.0), 70.0)
    assert not in_v2v_range(_veh(1, 0.0, 30.0), _veh(2, 70.5, 20.0), 70.0)


def test_coincident_vehicles_rejected():
    with pytest.raises(DomainError):
        in_v2v_range(_veh(1, 5.0, 20.0), _veh(2, 5.0, 30.0), 70.0)


def test_capacity_boundary_is_strict():
    task = SequentialTask.from_lists(1, 1e6, [1e9, 1e9], [1e6, 1e6], 0.2)
    assert not has_capacity(_veh(2, 0.0, 20.0, cpu=1e10), task)
    assert has_capacity(_veh(2, 0.0, 20.0, cpu=1.1e10), task)


def test_build_candidates_applies_both_screens():
    nv = _veh(1, 0.0, 20.0, cpu=1e9)
    task = SequentialTask.from_lists(1, 1e6, [1e9], [1e6], 0.2)
    ivs = [_veh(10, 30.0, 20.0, cpu=1e10), _veh(11, 100.0, 20.0, cpu=1e10),
           _veh(12, 20.0, 20.0, cpu=4e9)]
    g = build_candidates([nv], {1: task}, ivs, ChannelParams())
    assert g.edges == {1: [10]}
    with pytest.raises(KeyError):
        build_candidates([nv], {}, ivs, ChannelParams())


def test_max_match_examples():
    m = max_match(CandidateGraph([1, 2], [1, 2], {1: [1], 2: [1, 2]}))
    assert m.pairs == [(1, 1), (2, 2)] and len(m) == 2
    empty = max_match(CandidateGraph([1, 2], [5], {}))
    assert len(empty) == 0 and empty.unmatched_nvs == [1, 2]
    full = max_match(CandidateGraph([1, 2, 3], [4, 5, 6], {n: [4, 5, 6] for n in (1, 2, 3)}))
    assert len(full) == 3


def test_graph_rejects_unknown_vertices():
    with pytest.raises(ValueError):
        CandidateGraph([1], [2], {1: [3]})
    with pytest.raises(ValueError):
        CandidateGraph([1], [2], {4: [2]})


@st.composite
def graphs(draw, max_side=6):
    n = draw(st.integers(0, max_side))
    k = draw(st.integers(0, max_side))
    nv_ids, iv_ids = list(range(1, n + 1)), list(range(101, 101 + k))
    edges = {}
    for a in nv_ids:
        targets = draw(st.lists(st.sampled_from(iv_ids), unique=True)) if iv_ids else []
        if targets:
            edges[a] = targets
    return CandidateGraph(nv_ids, iv_ids, edges)


def _is_valid(m, g):
    nvs = [n for n, _ in m.pairs]
    ivs = [i for _, i in m.pairs]
    return (len(set(nvs)) == len(nvs) and len(set(ivs)) == len(ivs)
            and all(g.has_edge(n, i) for n, i in m.pairs)
            and sorted(nvs + m.unmatched_nvs) == sorted(g.nv_ids))


@given(graphs())
def test_matching_is_maximum(g):
    m = max_match(g)
    assert _is_valid(m, g)
    assert len(m) == max_matching_size(g.nv_ids, g.iv_ids, g.edges)


@given(graphs(), st.data())
def test_removing_edges_never_grows_matching(g, data):
    edges = sorted(g.edge_set())
    drop = set(data.draw(st.lists(st.sampled_from(edges), unique=True))) if edges else set()
    sub = {}
    for n, i in edges:
        if (n, i) not in drop:
            sub.setdefault(n, []).append(i)
    assert len(max_match(CandidateGraph(g.nv_ids, g.iv_ids, sub))) <= len(max_match(g))


@given(graphs())
def test_matching_is_deterministic(g):
    assert max_match(g).pairs == max_match(g).pairs


def test_random_instances_against_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, k = rng.integers(0, 7, size=2)
        nv_ids, iv_ids = list(range(n)), list(range(100, 100 + k))
        edges = {a: [i for i in iv_ids if rng.random() < 0.35] for a in nv_ids}
        edges = {a: e for a, e in edges.items() if e}
        g = CandidateGraph(nv_ids, iv_ids, edges)
        assert len(max_match(g)) == max_matching_size(nv_ids, iv_ids, edges)


def test_promote_relabels_only_helpers():
    ivs = [_veh(10, 0.0, 20.0), _veh(11, 10.0, 20.0)]
    m = max_match(CandidateGraph([1], [10, 11], {1: [11]}))
    out = promote(ivs, m)
    assert [v.role for v in out] == [Role.IV, Role.HV]
