import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsched.graph import (
    GraphNode,
    WeightedGraph,
    build_graph,
    charge_window_ok,
    graph_from_edge_list,
    has_conflict,
    read_edge_list,
    scenario_worst_case_counts,
    task_window_ok,
    typed_graph,
    worst_case_counts,
    write_edge_list,
)
from crowdsched.model import GridPoint, Uav, Worker
from crowdsched.scenario_gen import RANDOM_1, generate
from crowdsched.sim import Simulation
from crowdsched.weights import cost_tables

from conftest import adjacency_from_nodes, fig4_snapshot, random_typed_nodes


def N(kind, **refs):
    return GraphNode(0, kind, 1.0, **refs)


@pytest.mark.parametrize("a,b,expected", [
    (N("UiTxWj", uav=0, task=0, worker=0), N("UiTxWj", uav=1, task=0, worker=1), True),   # same task
    (N("UiCyVk", uav=0, charge=0, vehicle=0), N("UiCyVk", uav=1, charge=0, vehicle=1), False),  # shared charge
    (N("Ui", uav=0), N("UiTx", uav=0, task=2), True),
    (N("Wj", worker=1), N("Vk", vehicle=1), False),
    (N("VkCy", vehicle=0, charge=1), N("UiCyVk", uav=0, charge=1, vehicle=0), True),
    (N("UiTx", uav=0, task=1), N("WjTx", worker=0, task=1), True),
])
def test_has_conflict_examples(a, b, expected):
    assert has_conflict(a, b) is expected
    assert has_conflict(b, a) is expected


def test_fig4_example_node_count(fig4):
    g = build_graph(fig4, cost_tables(fig4))
    counts = g.kind_counts()
    assert len(g) == 39
    assert counts == {"Ui": 2, "Wj": 2, "Vk": 1, "UiTx": 6, "WjTx": 6, "UiCy": 4, "VkCy": 2,
                      "UiTxWj": 12, "UiCyVk": 4}
    assert counts == worst_case_counts(2, 2, 1, 3, 2)


def test_worst_case_counts_default_scale():
    c = scenario_worst_case_counts(generate(RANDOM_1, seed=0))
    assert c["UiTxWj"] == 30 * 120 * 50
    assert c["UiCyVk"] == 30 * 20 * 20
    assert sum(c.values()) == 30 + 50 + 20 + 3600 + 6000 + 600 + 400 + 180000 + 12000


def test_levels_and_ordering(fig4):
    g = build_graph(fig4, cost_tables(fig4))
    nodes = g.nodes
    assert all(n.level == (2 if n.kind == "UiTxWj" else 1 if n.kind == "UiCyVk" else 0) for n in nodes)
    # nodes come grouped by kind, participant ids ascending inside a kind
    key = [(n.kind, n.uav or 0, n.worker or 0, n.vehicle or 0, n.task or 0, n.charge or 0) for n in nodes]
    kinds = [n.kind for n in nodes]
    assert kinds == sorted(kinds, key=["Ui", "Wj", "Vk", "UiTx", "WjTx", "UiCy", "VkCy",
                                       "UiTxWj", "UiCyVk"].index)
    for k in set(kinds):
        ks = [x for x in key if x[0] == k]
        assert len(set(ks)) == len(ks)


def test_clique_cover_matches_pairwise_conflicts(fig4):
    g = build_graph(fig4, cost_tables(fig4))
    nodes = g.nodes
    for a, b in itertools.combinations(range(len(g)), 2):
        assert g.adjacent(a, b) == has_conflict(nodes[a], nodes[b])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_typed_graph_adjacency_matches_predicate(seed):
    nodes = random_typed_nodes(np.random.default_rng(seed))
    g = typed_graph(nodes)
    adj = adjacency_from_nodes(nodes)
    for i in range(len(nodes)):
        assert set(g.neighbors(i).tolist()) == adj[i]


def test_build_is_deterministic():
    s = generate(RANDOM_1, seed=2)
    snap = Simulation(s).snapshot(60.0)
    a = build_graph(snap, cost_tables(snap))
    b = build_graph(snap, cost_tables(snap))
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.memberships, b.memberships)


def test_no_move_onto_own_cell():
    snap = fig4_snapshot()
    snap.workers = [Worker(0, snap.tasks[0].loc)]
    g = build_graph(snap, cost_tables(snap))
    assert not any(n.kind == "WjTx" and n.task == 0 for n in g.nodes)


def test_time_window_filters_pairs():
    snap = fig4_snapshot()
    # worker leaves before any joint task can finish
    snap.workers = [Worker(0, GridPoint(2.5, 1.5), downtime=1.0)]
    g = build_graph(snap, cost_tables(snap))
    assert g.kind_counts()["UiTxWj"] == 0
    u, w, t = snap.uavs[0], snap.workers[0], snap.tasks[0]
    assert not task_window_ok(0.0, u, w, t, 180.0)
    assert task_window_ok(0.0, u, Worker(0, GridPoint(2.5, 1.5)), t, 180.0)
    assert charge_window_ok(0.0, u, snap.vehicles[0], snap.charges[0], 180.0)
    assert not charge_window_ok(179.0, u, snap.vehicles[0], snap.charges[0], 180.0)


def test_window_filter_matches_scalar_check():
    s = generate(RANDOM_1, seed=4)
    snap = Simulation(s).snapshot(120.0)
    g = build_graph(snap, cost_tables(snap))
    U = {u.id: u for u in snap.uavs}
    W = {w.id: w for w in snap.workers}
    T = {t.id: t for t in snap.tasks}
    have = {(n.uav, n.task, n.worker) for n in g.nodes if n.kind == "UiTxWj"}
    for (ui, ti, wi) in list(have)[:500]:
        assert task_window_ok(snap.now, U[ui], W[wi], T[ti], snap.limit_time)


def test_uav_without_power_gets_no_moves():
    snap = fig4_snapshot()
    snap.uavs = [Uav(0, GridPoint(1.5, 1.5), power=0.0)]
    g = build_graph(snap, cost_tables(snap))
    kinds = [n.kind for n in g.nodes if n.uav == 0]
    assert kinds == ["Ui"]


def test_empty_snapshot_gives_empty_graph(fig4):
    fig4.uavs, fig4.workers, fig4.vehicles = [], [], []
    g = build_graph(fig4, cost_tables(fig4))
    assert len(g) == 0
    assert list(g.edges()) == []


def test_unknown_mode_rejected(fig4):
    with pytest.raises(ValueError):
        build_graph(fig4, cost_tables(fig4), "flat")


def test_edge_list_round_trip(fig4, tmp_path):
    g = build_graph(fig4, cost_tables(fig4))
    path = tmp_path / "g.txt"
    text = write_edge_list(g, path)
    assert path.read_text() == text
    assert text.startswith("# nodes 39\n")
    weights, levels, kinds, edges = read_edge_list(text)
    assert np.array_equal(weights, g.weights)
    assert np.array_equal(levels, g.levels)
    assert kinds == [n.kind for n in g.nodes]
    assert sorted(edges) == sorted(g.edges())
    back = graph_from_edge_list(text)
    for a, b in itertools.combinations(range(len(g)), 2):
        assert back.adjacent(a, b) == g.adjacent(a, b)


def test_from_edges_path():
    g = WeightedGraph.from_edges([1.0, 2.0, 1.5], [(0, 1), (1, 2)])
    assert g.adjacent(0, 1) and g.adjacent(1, 2) and not g.adjacent(0, 2)
    assert g.is_independent([0, 2]) and not g.is_independent([0, 1])


def test_subgraph_keeps_parent_ids(fig4):
    g = build_graph(fig4, cost_tables(fig4))
    sub = g.subgraph([3, 10, 20])
    assert sub.parent_ids.tolist() == [3, 10, 20]
    assert sub.node(1).kind == g.node(10).kind
    assert sub.adjacent(0, 1) == g.adjacent(3, 10)
